//! Orchestrates one experimental run under a chosen modality at 10 ms ticks
//! with 20 Hz logging, and extracts rail trajectories for replay.
//!
//! A run advances in 50 ms frames of five dynamics ticks. At each frame
//! boundary the runner logs a sample, evaluates the termination rules, then
//! refreshes perception; the controller runs every tick against the held
//! frame (VIL/SIL) or is skipped entirely (MIL). The boundary-sampled rules
//! make replayed runs terminate on exactly the same frame as their source.
//!
//! Per-tick order is fixed: perceive (boundary) -> control -> ego plant ->
//! lead. Changing it changes results; it is part of the reproducibility
//! contract.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::control::{lateral_command, longitudinal_command, ControllerGains, ControllerState};
use crate::dynamics::{
    bicycle_step, equivalent_wheel_angle, ideal_plant_step, lagged_plant_step, rail_step,
    slip_angle, DynamicsError, LaggedPlantState, PlantParams, RailTrajectory, SpeedFilter,
};
use crate::perception::{
    degradation_from_environment, perceive, DegradationOverrides, DegradationTable,
    PerceptionState,
};
use crate::scenario::{lead_state, lead_step, LeadMotion, ScenarioError, ScenarioSpec};
use crate::world::{
    lead_distance, DrivingType, EgoState, Environment, Modality, RunLog, SampleRecord,
    Terminal, VehicleParams, LOG_PERIOD, TICKS_PER_SAMPLE, TICK_DT,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("MIL run requires a rail trajectory")]
    MissingRail,
    #[error("rail trajectory shorter than the scenario: needs tick {needed}, has {len} points")]
    RailExhausted { needed: usize, len: usize },
    #[error("source log unusable for rail extraction: {0}")]
    BadRailSource(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Everything one run needs; immutable while the run executes.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub modality: Modality,
    pub scenario: ScenarioSpec,
    pub environment: Environment,
    pub vehicle: VehicleParams,
    pub gains: ControllerGains,
    pub plant: PlantParams,
    pub degradation: DegradationTable,
    pub overrides: DegradationOverrides,
    pub seed: u64,
    /// Replay source; required iff modality is MIL.
    pub rail: Option<Arc<RailTrajectory>>,
    pub config_digest: String,
}

/// Minimum forward offset of the lane anchor. The 0.5 s horizon collapses at
/// crawl speeds, and a pursuit target closer than a few meters turns lateral
/// prediction noise into full-lock steering.
const MIN_ANCHOR_AHEAD: f64 = 6.0;

/// Ego speed that arms the stopped-termination rule.
const STOP_ARM_SPEED: f64 = 1.0;

struct FrameSnapshot {
    t: f64,
    ego: EgoState,
    lead: crate::world::LeadState,
    true_distance: f64,
}

/// Execute one run to completion.
pub fn run(config: &RunConfig) -> Result<RunLog, RunError> {
    let spec = &config.scenario;
    let road = &spec.road;
    let rail = match config.modality {
        Modality::Mil => Some(config.rail.as_deref().ok_or(RunError::MissingRail)?),
        _ => {
            debug_assert!(config.rail.is_none() || config.modality != Modality::Mil);
            None
        }
    };
    if let Some(r) = rail {
        r.validate()?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ego = match rail {
        Some(r) => rail_ego_state(r, 0, &config.vehicle)?,
        None => EgoState::at_rest(road.pose_at(0.0)),
    };
    let mut lead = LeadMotion {
        arclength: spec.lead_spawn_arclength,
        speed: 0.0,
    };
    let mut filter = SpeedFilter::new(
        0.0,
        1.0,
        config.plant.kalman_process_noise,
        config.plant.kalman_measurement_noise,
    );
    let mut ctrl = ControllerState::new(spec.ego_set_speed, &config.gains);
    let mut percep = PerceptionState::default();
    let mut steer_cmd_held = 0.0;

    let mut collecting = spec.driving_type == DrivingType::Stopping;
    let mut lead_active = spec.driving_type == DrivingType::Stopping;
    let mut stop_armed = false;
    let mut stop_hold = 0.0;
    let mut records = Vec::new();
    // Instrumentation for the modality-isolation contract.
    let mut controller_calls = 0u64;

    let max_frames = (spec.max_duration / LOG_PERIOD).round() as usize;
    let mut terminal = Terminal::Timeout;

    for frame_idx in 0..=max_frames {
        let t = frame_idx as f64 * LOG_PERIOD;
        let lead_world = lead_state(lead, road, spec.lead_class);
        let d = lead_distance(&ego, &lead_world);

        // Following: the lead pulls away and data collection begins the
        // moment the gap closes to the trigger distance.
        if spec.driving_type == DrivingType::Following && !lead_active && d <= spec.follow_trigger_distance
        {
            lead_active = true;
            collecting = true;
        }

        // Refresh perception on the boundary.
        let anchor_s = road.project(ego.pose)? + (0.5 * ego.speed).max(MIN_ANCHOR_AHEAD);
        let anchor = road.pose_at(anchor_s);
        let degradation = degradation_from_environment(
            &config.environment,
            ego.pose.heading,
            &config.degradation,
            &config.overrides,
        );
        let (frame, new_percep) = perceive(
            &ego,
            &lead_world,
            anchor,
            &degradation,
            &percep,
            LOG_PERIOD,
            &mut rng,
        );
        percep = new_percep;

        let snapshot = FrameSnapshot {
            t,
            ego,
            lead: lead_world,
            true_distance: d,
        };

        // Commands for the first tick of this frame; they complete the
        // boundary record before any motion happens.
        let (accel_cmd, steer_cmd) = if config.modality == Modality::Mil {
            (0.0, 0.0)
        } else {
            controller_calls += 1;
            let (a, next_ctrl) = longitudinal_command(
                &frame,
                ego.speed_estimate,
                &ctrl,
                TICK_DT,
                &config.gains,
                config.vehicle.accel_limits,
            );
            ctrl = next_ctrl;
            steer_cmd_held = lateral_command(
                ego.pose,
                frame.predicted_pose_500ms,
                ego.speed_estimate,
                &config.vehicle,
            )
            .unwrap_or(steer_cmd_held);
            (a, steer_cmd_held)
        };

        if collecting {
            records.push(SampleRecord {
                t: snapshot.t,
                ego: snapshot.ego,
                lead: snapshot.lead,
                true_distance: snapshot.true_distance,
                perceived_distance: frame.perceived_distance,
                predicted_pose_500ms: frame.predicted_pose_500ms,
                accel_cmd,
                steer_cmd,
            });
        }

        // Termination rules, evaluated on the boundary state just logged.
        if d <= 0.0 {
            terminal = Terminal::Collision;
            break;
        }
        match spec.driving_type {
            DrivingType::Stopping => {
                if ego.speed >= STOP_ARM_SPEED {
                    stop_armed = true;
                }
                if stop_armed && ego.speed < spec.stop_speed_threshold {
                    stop_hold += LOG_PERIOD;
                } else {
                    stop_hold = 0.0;
                }
                if stop_hold >= spec.stop_hold_time {
                    terminal = Terminal::Stopped;
                    break;
                }
            }
            DrivingType::Following => {
                if let Some(end_s) = spec.termination_arclength {
                    if road.project(ego.pose)? >= end_s {
                        terminal = Terminal::DistanceComplete;
                        break;
                    }
                }
            }
        }
        if frame_idx == max_frames {
            terminal = Terminal::Timeout;
            break;
        }

        // Advance the frame: five dynamics ticks.
        for sub in 1..=TICKS_PER_SAMPLE {
            let tick = frame_idx * TICKS_PER_SAMPLE + sub;
            match config.modality {
                Modality::Vil | Modality::Sil => {
                    let a = if sub == 1 {
                        accel_cmd
                    } else {
                        controller_calls += 1;
                        let (a, next_ctrl) = longitudinal_command(
                            &frame,
                            ego.speed_estimate,
                            &ctrl,
                            TICK_DT,
                            &config.gains,
                            config.vehicle.accel_limits,
                        );
                        ctrl = next_ctrl;
                        a
                    };
                    if config.modality == Modality::Vil {
                        let plant = LaggedPlantState {
                            ego,
                            accel_time_constant: config.plant.accel_time_constant,
                            steer_time_constant: config.plant.steer_time_constant,
                            wheel_noise_std: config.plant.wheel_noise_std,
                            params: config.vehicle,
                        };
                        let (next, next_filter) =
                            lagged_plant_step(&plant, &filter, a, steer_cmd_held, TICK_DT, &mut rng);
                        ego = next.ego;
                        filter = next_filter;
                    } else {
                        ego = ideal_plant_step(&ego, a, steer_cmd_held, TICK_DT, &config.vehicle);
                    }
                }
                Modality::Mil => {
                    let r = rail.unwrap();
                    if tick >= r.len() {
                        return Err(RunError::RailExhausted {
                            needed: tick,
                            len: r.len(),
                        });
                    }
                    ego = rail_ego_state(r, tick, &config.vehicle)?;
                }
            }
            let cruise = if lead_active { spec.lead_cruise_speed } else { 0.0 };
            lead = lead_step(lead, cruise, TICK_DT);
        }
    }
    debug_assert!(config.modality != Modality::Mil || controller_calls == 0);
    let _ = controller_calls;

    Ok(RunLog {
        config_digest: config.config_digest.clone(),
        modality: config.modality,
        driving_type: spec.driving_type,
        environment: config.environment,
        seed: config.seed,
        records,
        terminal,
    })
}

fn rail_ego_state(
    rail: &RailTrajectory,
    tick: usize,
    vehicle: &VehicleParams,
) -> Result<EgoState, RunError> {
    let (pose, speed, wheel) = rail_step(rail, tick)?;
    let slip = slip_angle(wheel, vehicle)?;
    Ok(EgoState {
        pose,
        speed,
        speed_estimate: speed,
        steer_wheel_angle: wheel * vehicle.steering_ratio,
        accel_actual: 0.0,
        slip_angle: slip,
    })
}

/// Upsample a 20 Hz log to the 10 ms rail by linear interpolation of speed
/// and wheel angle, re-integrating the pose anchored at every logged sample.
pub fn extract_rail(source: &RunLog, vehicle: &VehicleParams) -> Result<RailTrajectory, RunError> {
    if source.modality == Modality::Mil {
        return Err(RunError::BadRailSource(
            "rail source must be a VIL or SIL run".into(),
        ));
    }
    let recs = &source.records;
    if recs.len() < 2 {
        return Err(RunError::BadRailSource(format!(
            "need at least 2 records, got {}",
            recs.len()
        )));
    }
    for w in recs.windows(2) {
        let gap = w[1].t - w[0].t;
        if (gap - LOG_PERIOD).abs() > 1e-9 {
            return Err(RunError::BadRailSource(format!(
                "gap of {gap:.4} s between samples at t = {:.3}",
                w[0].t
            )));
        }
    }

    let n = recs.len();
    let mut poses = Vec::with_capacity((n - 1) * TICKS_PER_SAMPLE + 1);
    let mut speeds = Vec::with_capacity(poses.capacity());
    let mut wheel_angles = Vec::with_capacity(poses.capacity());

    for k in 0..n - 1 {
        let a = &recs[k];
        let b = &recs[k + 1];
        let w0 = equivalent_wheel_angle(a.ego.steer_wheel_angle, vehicle.steering_ratio)?;
        let w1 = equivalent_wheel_angle(b.ego.steer_wheel_angle, vehicle.steering_ratio)?;
        poses.push(a.ego.pose);
        speeds.push(a.ego.speed);
        wheel_angles.push(w0);
        let mut pose = a.ego.pose;
        for j in 1..TICKS_PER_SAMPLE {
            let f = j as f64 / TICKS_PER_SAMPLE as f64;
            let v = a.ego.speed + f * (b.ego.speed - a.ego.speed);
            let w = w0 + f * (w1 - w0);
            let slip = slip_angle(w, vehicle)?;
            pose = bicycle_step(pose, v, w, slip, TICK_DT, vehicle);
            poses.push(pose);
            speeds.push(v);
            wheel_angles.push(w);
        }
    }
    let last = &recs[n - 1];
    poses.push(last.ego.pose);
    speeds.push(last.ego.speed);
    wheel_angles.push(equivalent_wheel_angle(
        last.ego.steer_wheel_angle,
        vehicle.steering_ratio,
    )?);

    let rail = RailTrajectory {
        poses,
        speeds,
        wheel_angles,
    };
    rail.validate()?;
    Ok(rail)
}
