//! Road construction, the Stopping and Following driving types, and lead
//! vehicle behavior.
//!
//! A road is a C1-continuous chain of straight and arc segments with an
//! analytic pose at every arc length; the centerline is that curve sampled
//! every 1 m, which is what lane-position measurements and centerline-distance
//! metrics operate on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{mph_to_mps, DrivingType, LeadClass, LeadState, Pose};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("road is {actual:.1} m long but the {driving} scenario needs {required:.1} m")]
    RoadTooShort {
        driving: &'static str,
        actual: f64,
        required: f64,
    },
    #[error("segment {index} invalid: {reason}")]
    BadSegment { index: usize, reason: String },
    #[error("point ({x:.1}, {y:.1}) is {dist:.1} m from the road (limit {limit} m)")]
    TooFarFromRoad { x: f64, y: f64, dist: f64, limit: f64 },
    #[error("road needs at least two centerline samples")]
    DegenerateRoad,
}

/// One road piece. Arc angle is signed: positive bends left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Straight { length: f64 },
    Arc { radius: f64, angle: f64 },
}

impl Segment {
    fn arc_length(&self) -> f64 {
        match *self {
            Segment::Straight { length } => length,
            Segment::Arc { radius, angle } => radius * angle.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SegmentGeom {
    segment: Segment,
    start: Pose,
    start_s: f64,
    length: f64,
}

impl SegmentGeom {
    /// Analytic pose at local arc length `s` into this segment.
    fn pose_at(&self, s: f64) -> Pose {
        let h0 = self.start.heading;
        match self.segment {
            Segment::Straight { .. } => {
                let (sin_h, cos_h) = h0.sin_cos();
                Pose::new(self.start.x + s * cos_h, self.start.y + s * sin_h, h0)
            }
            Segment::Arc { radius, angle } => {
                let sign = angle.signum();
                // Center sits one radius to the inside of the turn.
                let (sin_h, cos_h) = h0.sin_cos();
                let cx = self.start.x - sign * radius * sin_h;
                let cy = self.start.y + sign * radius * cos_h;
                let psi0 = h0 - sign * std::f64::consts::FRAC_PI_2;
                let psi = psi0 + sign * s / radius;
                Pose::new(
                    cx + radius * psi.cos(),
                    cy + radius * psi.sin(),
                    psi + sign * std::f64::consts::FRAC_PI_2,
                )
            }
        }
    }
}

/// A lane with a 1 m-spaced sampled centerline.
#[derive(Debug, Clone)]
pub struct Road {
    geoms: Vec<SegmentGeom>,
    total_length: f64,
    /// Centerline poses at arc lengths 0, 1, 2, ... m.
    pub centerline: Vec<Pose>,
}

/// How far off the road a query point may be before lookups error out.
pub const ROAD_QUERY_LIMIT: f64 = 50.0;

impl Road {
    pub fn new(start: Pose, segments: &[Segment]) -> Result<Road, ScenarioError> {
        let mut geoms = Vec::with_capacity(segments.len());
        let mut cursor = start;
        let mut total = 0.0;
        for (index, seg) in segments.iter().enumerate() {
            match *seg {
                Segment::Straight { length } if length <= 0.0 => {
                    return Err(ScenarioError::BadSegment {
                        index,
                        reason: format!("straight length {length} must be positive"),
                    })
                }
                Segment::Arc { radius, angle } if radius <= 0.0 || angle == 0.0 => {
                    return Err(ScenarioError::BadSegment {
                        index,
                        reason: format!("arc radius {radius} / angle {angle} invalid"),
                    })
                }
                _ => {}
            }
            let geom = SegmentGeom {
                segment: *seg,
                start: cursor,
                start_s: total,
                length: seg.arc_length(),
            };
            cursor = geom.pose_at(geom.length);
            total += geom.length;
            geoms.push(geom);
        }
        let samples = total.floor() as usize;
        if samples < 1 {
            return Err(ScenarioError::DegenerateRoad);
        }
        let mut road = Road {
            geoms,
            total_length: total,
            centerline: Vec::with_capacity(samples + 1),
        };
        for k in 0..=samples {
            road.centerline.push(road.pose_at(k as f64));
        }
        if road.centerline.len() < 2 {
            return Err(ScenarioError::DegenerateRoad);
        }
        Ok(road)
    }

    /// Convenience constructor for the default test road: a 200 m straight
    /// into a 400 m-radius left arc covering the remaining length.
    pub fn default_track(total_length: f64) -> Road {
        let arc_len = total_length - 200.0;
        Road::new(
            Pose::origin(),
            &[
                Segment::Straight { length: 200.0 },
                Segment::Arc {
                    radius: 400.0,
                    angle: arc_len / 400.0,
                },
            ],
        )
        .expect("default track geometry is valid")
    }

    pub fn arc_length(&self) -> f64 {
        self.total_length
    }

    /// Analytic pose at arc length `s` (clamped to the road extent).
    pub fn pose_at(&self, s: f64) -> Pose {
        let s = s.clamp(0.0, self.total_length);
        let geom = self
            .geoms
            .iter()
            .rev()
            .find(|g| s >= g.start_s - 1e-12)
            .expect("road has at least one segment");
        geom.pose_at((s - geom.start_s).min(geom.length))
    }

    /// Arc length of the point's projection onto the sampled centerline.
    pub fn project(&self, point: Pose) -> Result<f64, ScenarioError> {
        let (i, j) = self.nearest_pair_indices(point)?;
        let (a, b) = (self.centerline[i], self.centerline[j]);
        let abx = b.x - a.x;
        let aby = b.y - a.y;
        let len_sq = abx * abx + aby * aby;
        let t = (((point.x - a.x) * abx + (point.y - a.y) * aby) / len_sq).clamp(0.0, 1.0);
        Ok((i as f64 + t * (j as f64 - i as f64)).clamp(0.0, self.total_length))
    }

    fn nearest_pair_indices(&self, point: Pose) -> Result<(usize, usize), ScenarioError> {
        // Exhaustive two-smallest scan; ties go to the larger index so that
        // a point exactly on sample k pairs with its arc-length successor.
        let mut best = (f64::INFINITY, 0usize);
        let mut second = (f64::INFINITY, 0usize);
        for (idx, c) in self.centerline.iter().enumerate() {
            let d = (c.x - point.x).hypot(c.y - point.y);
            if d < best.0 || (d == best.0 && idx > best.1) {
                second = best;
                best = (d, idx);
            } else if d < second.0 || (d == second.0 && idx > second.1) {
                second = (d, idx);
            }
        }
        if best.0 > ROAD_QUERY_LIMIT {
            return Err(ScenarioError::TooFarFromRoad {
                x: point.x,
                y: point.y,
                dist: best.0,
                limit: ROAD_QUERY_LIMIT,
            });
        }
        Ok(if best.1 <= second.1 {
            (best.1, second.1)
        } else {
            (second.1, best.1)
        })
    }
}

/// The two nearest centerline samples to a point, ordered by arc length.
pub fn nearest_centerline_pair(road: &Road, point: Pose) -> Result<(Pose, Pose), ScenarioError> {
    let (i, j) = road.nearest_pair_indices(point)?;
    Ok((road.centerline[i], road.centerline[j]))
}

/// A fully parameterized driving experiment.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub driving_type: DrivingType,
    pub road: Road,
    pub lead_class: LeadClass,
    /// Lead spawn position measured along the lane, m.
    pub lead_spawn_arclength: f64,
    pub ego_set_speed: f64,
    pub lead_cruise_speed: f64,
    /// Following: distance at which the lead starts cruising and data
    /// collection begins, m.
    pub follow_trigger_distance: f64,
    /// Following: run ends when the ego passes this arc length, m.
    pub termination_arclength: Option<f64>,
    /// Stopping: ego speed below this for `stop_hold_time` ends the run.
    pub stop_speed_threshold: f64,
    pub stop_hold_time: f64,
    pub max_duration: f64,
}

/// Stopped lead 125 m down the lane; ego launches to 30 mph and must stop.
pub fn build_stopping_scenario(road: Road, lead_class: LeadClass) -> Result<ScenarioSpec, ScenarioError> {
    const REQUIRED: f64 = 200.0;
    if road.arc_length() < REQUIRED {
        return Err(ScenarioError::RoadTooShort {
            driving: "stopping",
            actual: road.arc_length(),
            required: REQUIRED,
        });
    }
    Ok(ScenarioSpec {
        driving_type: DrivingType::Stopping,
        road,
        lead_class,
        lead_spawn_arclength: 125.0,
        ego_set_speed: mph_to_mps(30.0).unwrap(),
        lead_cruise_speed: 0.0,
        follow_trigger_distance: 0.0,
        termination_arclength: None,
        stop_speed_threshold: 0.1,
        stop_hold_time: 1.0,
        max_duration: 60.0,
    })
}

/// Parked lead a short gap ahead; ego closes to 15 m, the lead pulls away at
/// 30 mph, and the run ends 695 m down the lane.
pub fn build_following_scenario(road: Road, lead_class: LeadClass) -> Result<ScenarioSpec, ScenarioError> {
    const REQUIRED: f64 = 750.0;
    if road.arc_length() < REQUIRED {
        return Err(ScenarioError::RoadTooShort {
            driving: "following",
            actual: road.arc_length(),
            required: REQUIRED,
        });
    }
    Ok(ScenarioSpec {
        driving_type: DrivingType::Following,
        road,
        lead_class,
        lead_spawn_arclength: 30.0,
        ego_set_speed: mph_to_mps(35.0).unwrap(),
        lead_cruise_speed: mph_to_mps(30.0).unwrap(),
        follow_trigger_distance: 15.0,
        termination_arclength: Some(695.0),
        stop_speed_threshold: 0.1,
        stop_hold_time: 1.0,
        max_duration: 150.0,
    })
}

/// Lead vehicle motion along the lane; its lateral control is idealized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadMotion {
    pub arclength: f64,
    pub speed: f64,
}

/// Proportional speed gain of the lead's waypoint controller, 1/s.
pub const LEAD_SPEED_GAIN: f64 = 1.5;
/// Acceleration clamp of the lead's waypoint controller, m/s^2.
pub const LEAD_ACCEL_LIMIT: f64 = 2.0;

/// Advance the lead one tick: speed relaxes toward the cruise speed under a
/// clamped proportional law and the position tracks the lane exactly.
pub fn lead_step(motion: LeadMotion, cruise_speed: f64, dt: f64) -> LeadMotion {
    debug_assert!(dt > 0.0);
    let accel = (LEAD_SPEED_GAIN * (cruise_speed - motion.speed))
        .clamp(-LEAD_ACCEL_LIMIT, LEAD_ACCEL_LIMIT);
    let speed = (motion.speed + accel * dt).max(0.0).min(cruise_speed.max(motion.speed));
    LeadMotion {
        arclength: motion.arclength + speed * dt,
        speed,
    }
}

/// Materialize the world-frame lead state from its lane motion.
pub fn lead_state(motion: LeadMotion, road: &Road, lead_class: LeadClass) -> LeadState {
    LeadState {
        pose: road.pose_at(motion.arclength),
        speed: motion.speed,
        rear_offset: lead_class.rear_offset(),
    }
}
