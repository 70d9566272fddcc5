//! Shared domain types, world-frame geometry and unit conversions.
//!
//! The world is a flat 2-D plane. Headings are counterclockwise radians,
//! normalized to `(-pi, pi]`. All speeds are stored in SI; mph appears only
//! at config and report boundaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact mph -> m/s factor.
pub const MPH_TO_MPS: f64 = 0.44704;

/// Dynamics tick, fixed at 10 ms.
pub const TICK_DT: f64 = 0.010;

/// Sample/log period, fixed at 50 ms (20 Hz).
pub const LOG_PERIOD: f64 = 0.050;

/// Dynamics ticks per logged sample.
pub const TICKS_PER_SAMPLE: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("field {field} = {value} outside valid range [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("environment preset {0} does not match the preset field table")]
    PresetMismatch(String),
}

/// Wrap a heading into `(-pi, pi]`. Idempotent.
pub fn normalize_heading(theta: f64) -> f64 {
    let r = theta.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Convert miles per hour to meters per second.
pub fn mph_to_mps(v_mph: f64) -> Result<f64, WorldError> {
    if v_mph < 0.0 || !v_mph.is_finite() {
        return Err(WorldError::NegativeSpeed(v_mph));
    }
    Ok(v_mph * MPH_TO_MPS)
}

/// Position and orientation in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Counterclockwise from +x, normalized to `(-pi, pi]`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }

    pub fn origin() -> Self {
        Pose::new(0.0, 0.0, 0.0)
    }

    /// Euclidean center-to-center distance.
    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Full kinematic and actuator state of the controlled vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub pose: Pose,
    /// True total speed, m/s, >= 0.
    pub speed: f64,
    /// Wheel-speed fusion estimate fed to the controller.
    pub speed_estimate: f64,
    /// Steering-wheel angle, rad.
    pub steer_wheel_angle: f64,
    /// Realized longitudinal acceleration, m/s^2.
    pub accel_actual: f64,
    /// Slip angle at the vehicle center, rad.
    pub slip_angle: f64,
}

impl EgoState {
    /// A vehicle at rest with centered steering.
    pub fn at_rest(pose: Pose) -> Self {
        EgoState {
            pose,
            speed: 0.0,
            speed_estimate: 0.0,
            steer_wheel_angle: 0.0,
            accel_actual: 0.0,
            slip_angle: 0.0,
        }
    }
}

/// Pose and speed of the lead vehicle plus its center-to-rear-bumper offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadState {
    pub pose: Pose,
    pub speed: f64,
    /// Center-to-rear-bumper distance, m, > 0.
    pub rear_offset: f64,
}

/// Static parameters of the controlled vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Wheelbase L, m.
    pub wheelbase: f64,
    /// Steering-wheel to road-wheel ratio.
    pub steering_ratio: f64,
    pub mass: f64,
    /// l_r / L used by the slip-angle relation; 0 selects the rear-axle model.
    pub rear_axle_fraction: f64,
    /// [min, max] commanded acceleration, m/s^2, min < 0 < max.
    pub accel_limits: [f64; 2],
    /// Steering-wheel rate limit, rad/s.
    pub steer_rate_limit: f64,
    /// Steering-wheel angle limit, rad.
    pub steer_limit: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.wheelbase <= 0.0 {
            return Err(WorldError::OutOfRange {
                field: "wheelbase",
                value: self.wheelbase,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
            });
        }
        if self.steering_ratio <= 0.0 {
            return Err(WorldError::OutOfRange {
                field: "steering_ratio",
                value: self.steering_ratio,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
            });
        }
        if !(self.accel_limits[0] < 0.0 && 0.0 < self.accel_limits[1]) {
            return Err(WorldError::OutOfRange {
                field: "accel_limits",
                value: self.accel_limits[0],
                min: f64::NEG_INFINITY,
                max: 0.0,
            });
        }
        Ok(())
    }
}

impl Default for VehicleParams {
    /// 2019 Toyota RAV4 geometry with ADAS-style command limits.
    fn default() -> Self {
        VehicleParams {
            wheelbase: 2.69,
            steering_ratio: 14.3,
            mass: 1530.0,
            rear_axle_fraction: 0.5,
            accel_limits: [-3.5, 2.0],
            steer_rate_limit: 8.0,
            steer_limit: 6.0,
        }
    }
}

/// Lead vehicle body class; fixes the center-to-rear-bumper offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadClass {
    BlackSedan,
    Ambulance,
}

impl LeadClass {
    pub fn rear_offset(self) -> f64 {
        match self {
            LeadClass::BlackSedan => 2.39,
            LeadClass::Ambulance => 3.17,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LeadClass::BlackSedan => "sedan",
            LeadClass::Ambulance => "ambulance",
        }
    }
}

/// Named weather/lighting presets of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherPreset {
    SunsetClear,
    RainFog,
    SunGlare,
    Night,
    NoonClear,
    Custom,
}

impl WeatherPreset {
    pub fn label(self) -> &'static str {
        match self {
            WeatherPreset::SunsetClear => "sunset_clear",
            WeatherPreset::RainFog => "rain_fog",
            WeatherPreset::SunGlare => "sun_glare",
            WeatherPreset::Night => "night",
            WeatherPreset::NoonClear => "noon_clear",
            WeatherPreset::Custom => "custom",
        }
    }
}

/// Weather/lighting/lead parameterization that drives perception degradation.
///
/// Sun azimuth shares the heading convention: degrees counterclockwise from
/// the world +x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub preset: WeatherPreset,
    /// [0, 1].
    pub fog_fraction: f64,
    /// [0, 1].
    pub rain_intensity: f64,
    /// Degrees above horizon, [0, 90].
    pub sun_altitude: f64,
    /// Degrees CCW from world +x, [0, 360).
    pub sun_azimuth: f64,
    pub night: bool,
    pub lead_class: LeadClass,
}

impl Environment {
    /// The field table for the named presets.
    pub fn preset(preset: WeatherPreset, lead_class: LeadClass) -> Environment {
        let (fog, rain, alt, az, night) = match preset {
            // Clear evening; sun low behind the default eastbound start.
            WeatherPreset::SunsetClear => (0.0, 0.0, 12.0, 180.0, false),
            // Hardest rain, 15% fog, mid-afternoon sun.
            WeatherPreset::RainFog => (0.15, 1.0, 50.0, 200.0, false),
            // Low sun dead ahead of the default eastbound start.
            WeatherPreset::SunGlare => (0.0, 0.0, 10.0, 0.0, false),
            WeatherPreset::Night => (0.0, 0.0, 0.0, 0.0, true),
            // Sun overhead.
            WeatherPreset::NoonClear => (0.0, 0.0, 90.0, 0.0, false),
            WeatherPreset::Custom => (0.0, 0.0, 90.0, 0.0, false),
        };
        Environment {
            preset,
            fog_fraction: fog,
            rain_intensity: rain,
            sun_altitude: alt,
            sun_azimuth: az,
            night,
            lead_class,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let ranges: [(&'static str, f64, f64, f64); 4] = [
            ("fog_fraction", self.fog_fraction, 0.0, 1.0),
            ("rain_intensity", self.rain_intensity, 0.0, 1.0),
            ("sun_altitude", self.sun_altitude, 0.0, 90.0),
            ("sun_azimuth", self.sun_azimuth, 0.0, 360.0),
        ];
        for (field, value, min, max) in ranges {
            if !(min..=max).contains(&value) || !value.is_finite() {
                return Err(WorldError::OutOfRange {
                    field,
                    value,
                    min,
                    max,
                });
            }
        }
        if self.preset != WeatherPreset::Custom {
            let reference = Environment::preset(self.preset, self.lead_class);
            if reference != *self {
                return Err(WorldError::PresetMismatch(self.preset.label().to_string()));
            }
        }
        Ok(())
    }
}

/// Loop topology of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Vil,
    Sil,
    Mil,
}

impl Modality {
    pub fn label(self) -> &'static str {
        match self {
            Modality::Vil => "vil",
            Modality::Sil => "sil",
            Modality::Mil => "mil",
        }
    }
}

/// The two driving tasks under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingType {
    Stopping,
    Following,
}

impl DrivingType {
    pub fn label(self) -> &'static str {
        match self {
            DrivingType::Stopping => "stopping",
            DrivingType::Following => "following",
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Stopped,
    Collision,
    DistanceComplete,
    Timeout,
}

/// One 20 Hz log sample: true state, perception output, and the commands the
/// frame produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub ego: EgoState,
    pub lead: LeadState,
    /// True inter-vehicle distance d at this sample.
    pub true_distance: f64,
    /// Perceived distance estimate; absent when there is no detection.
    pub perceived_distance: Option<f64>,
    /// Predicted ego position 500 ms ahead.
    pub predicted_pose_500ms: Pose,
    pub accel_cmd: f64,
    pub steer_cmd: f64,
}

/// Complete 20 Hz time series of one experimental run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config_digest: String,
    pub modality: Modality,
    pub driving_type: DrivingType,
    pub environment: Environment,
    pub seed: u64,
    pub records: Vec<SampleRecord>,
    pub terminal: Terminal,
}

/// True inter-vehicle distance: ego center to lead rear bumper.
///
/// May be <= 0 only at collision/overlap.
pub fn lead_distance(ego: &EgoState, lead: &LeadState) -> f64 {
    ego.pose.distance_to(&lead.pose) - lead.rear_offset
}

/// FNV-1a over bytes; the stable hash used for per-run seed derivation and
/// config digests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the seed of one run from the experiment seed and run identity.
pub fn derive_run_seed(base_seed: u64, condition_id: &str, run_index: u32) -> u64 {
    let mut bytes = Vec::with_capacity(condition_id.len() + 12);
    bytes.extend_from_slice(&base_seed.to_le_bytes());
    bytes.extend_from_slice(condition_id.as_bytes());
    bytes.extend_from_slice(&run_index.to_le_bytes());
    fnv1a64(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mph_conversion_examples() {
        assert_eq!(mph_to_mps(0.0).unwrap(), 0.0);
        assert!((mph_to_mps(30.0).unwrap() - 13.4112).abs() < 1e-12);
        assert!((mph_to_mps(35.0).unwrap() - 15.6464).abs() < 1e-12);
        assert!(mph_to_mps(-1.0).is_err());
    }

    #[test]
    fn lead_distance_examples() {
        let ego = EgoState::at_rest(Pose::origin());
        let sedan = LeadState {
            pose: Pose::new(24.39, 0.0, 0.0),
            speed: 0.0,
            rear_offset: 2.39,
        };
        assert!((lead_distance(&ego, &sedan) - 22.0).abs() < 1e-12);

        let ambulance = LeadState {
            pose: Pose::new(3.17, 0.0, 0.0),
            speed: 0.0,
            rear_offset: 3.17,
        };
        assert!(lead_distance(&ego, &ambulance).abs() < 1e-12);

        let overlapped = LeadState {
            pose: Pose::origin(),
            speed: 0.0,
            rear_offset: 2.39,
        };
        assert!((lead_distance(&ego, &overlapped) + 2.39).abs() < 1e-12);
    }

    #[test]
    fn heading_boundary_values() {
        use std::f64::consts::PI;
        assert_eq!(normalize_heading(PI), PI);
        assert_eq!(normalize_heading(-PI), PI);
        assert_eq!(normalize_heading(0.0), 0.0);
        assert!((normalize_heading(3.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn preset_table_is_self_consistent() {
        for preset in [
            WeatherPreset::SunsetClear,
            WeatherPreset::RainFog,
            WeatherPreset::SunGlare,
            WeatherPreset::Night,
            WeatherPreset::NoonClear,
        ] {
            let env = Environment::preset(preset, LeadClass::BlackSedan);
            env.validate().unwrap();
        }
        let mut env = Environment::preset(WeatherPreset::Night, LeadClass::Ambulance);
        env.fog_fraction = 0.5;
        assert!(matches!(env.validate(), Err(WorldError::PresetMismatch(_))));
    }

    #[test]
    fn run_seed_derivation_is_stable_and_distinct() {
        let a = derive_run_seed(7, "stopping/vil/night/sedan", 0);
        let b = derive_run_seed(7, "stopping/vil/night/sedan", 1);
        let c = derive_run_seed(8, "stopping/vil/night/sedan", 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_run_seed(7, "stopping/vil/night/sedan", 0));
    }

    proptest! {
        #[test]
        fn heading_normalization_idempotent(theta in -1e6f64..1e6) {
            let once = normalize_heading(theta);
            prop_assert!(once > -std::f64::consts::PI && once <= std::f64::consts::PI);
            prop_assert_eq!(once, normalize_heading(once));
        }

        #[test]
        fn lead_distance_rigid_invariant(
            ex in -100.0f64..100.0, ey in -100.0f64..100.0,
            lx in -100.0f64..100.0, ly in -100.0f64..100.0,
            tx in -50.0f64..50.0, ty in -50.0f64..50.0,
            rot in -3.0f64..3.0,
        ) {
            let ego = EgoState::at_rest(Pose::new(ex, ey, 0.0));
            let lead = LeadState { pose: Pose::new(lx, ly, 0.0), speed: 0.0, rear_offset: 2.39 };
            let d0 = lead_distance(&ego, &lead);

            let xf = |x: f64, y: f64| {
                (x * rot.cos() - y * rot.sin() + tx, x * rot.sin() + y * rot.cos() + ty)
            };
            let (ex2, ey2) = xf(ex, ey);
            let (lx2, ly2) = xf(lx, ly);
            let ego2 = EgoState::at_rest(Pose::new(ex2, ey2, rot));
            let lead2 = LeadState { pose: Pose::new(lx2, ly2, rot), speed: 0.0, rear_offset: 2.39 };
            prop_assert!((lead_distance(&ego2, &lead2) - d0).abs() < 1e-9);
        }
    }
}
