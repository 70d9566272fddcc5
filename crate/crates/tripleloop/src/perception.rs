//! Parametric synthetic perception model.
//!
//! Maps true world state plus the Environment to the two outputs the
//! controller consumes: a lead-distance estimate and a 500 ms-ahead predicted
//! position. Degradation is a multiplicative distance bias composed from a
//! per-preset base table, a piecewise-linear fog factor, and two smooth sun
//! cones (frontal glare and right-rear), plus a mean-reverting lateral error
//! on the predicted position.
//!
//! The preset bias values are calibration defaults, overridable from config;
//! they are not measurements of any particular vision model.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::world::{lead_distance, EgoState, Environment, LeadClass, LeadState, Pose, WeatherPreset};

/// Perception output for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionFrame {
    /// Lead-distance estimate, present iff `detection`.
    pub perceived_distance: Option<f64>,
    /// Predicted ego position 500 ms ahead.
    pub predicted_pose_500ms: Pose,
    pub detection: bool,
}

impl PerceptionFrame {
    /// Frame emitted before the first perception tick of a run.
    pub fn empty(anchor: Pose) -> Self {
        PerceptionFrame {
            perceived_distance: None,
            predicted_pose_500ms: anchor,
            detection: false,
        }
    }
}

/// Effective degradation of one frame, after composing environment factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    /// Multiplicative distance bias B; > 1 overestimates.
    pub distance_bias: f64,
    /// Fractional std of the distance noise.
    pub distance_noise_std: f64,
    /// Stationary std of the lateral prediction error, m.
    pub lateral_error_std: f64,
    /// Mean-reversion timescale of the lateral error, s.
    pub lateral_error_timescale: f64,
    /// Maximum true distance at which the lead is detected, m.
    pub detection_range: f64,
}

/// Per-run correlated error state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerceptionState {
    /// Current lateral prediction error, m.
    pub lateral_error: f64,
}

/// One smooth bump of the sun-angle bias model. The factor applies fully at
/// the cone center and tapers to 1 at the cone edges (cos^2 in both axes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SunCone {
    /// Cone center, degrees of sun azimuth relative to ego heading.
    pub center_deg: f64,
    /// Azimuth half width, degrees.
    pub half_width_deg: f64,
    /// Altitude above which the cone has no effect, degrees.
    pub max_altitude_deg: f64,
    /// Bias factor at the cone center.
    pub factor: f64,
}

impl SunCone {
    fn weight(&self, rel_azimuth_deg: f64, altitude_deg: f64) -> f64 {
        let mut delta = (rel_azimuth_deg - self.center_deg).rem_euclid(360.0);
        if delta > 180.0 {
            delta -= 360.0;
        }
        if delta.abs() >= self.half_width_deg || altitude_deg >= self.max_altitude_deg {
            return 0.0;
        }
        let az = (std::f64::consts::FRAC_PI_2 * delta / self.half_width_deg).cos();
        let alt = (std::f64::consts::FRAC_PI_2 * altitude_deg / self.max_altitude_deg).cos();
        az * az * alt * alt
    }

    fn factor(&self, rel_azimuth_deg: f64, altitude_deg: f64) -> f64 {
        1.0 + (self.factor - 1.0) * self.weight(rel_azimuth_deg, altitude_deg)
    }
}

/// Base bias and lateral scaling for one weather preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetBias {
    pub sedan: f64,
    pub ambulance: f64,
    /// Multiplier on the base lateral error std.
    pub lateral_factor: f64,
}

impl PresetBias {
    pub fn bias_for(&self, lead: LeadClass) -> f64 {
        match lead {
            LeadClass::BlackSedan => self.sedan,
            LeadClass::Ambulance => self.ambulance,
        }
    }
}

/// The full degradation preset table; loadable from the harness config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationTable {
    /// Lateral error std under the neutral preset, m.
    pub base_lateral_error_std: f64,
    /// Mean-reversion timescale of the lateral error, s.
    pub lateral_error_timescale: f64,
    /// Fractional distance noise std.
    pub distance_noise_std: f64,
    /// Detection range, m.
    pub detection_range: f64,
    /// Fog fraction below which fog has no effect.
    pub fog_knee: f64,
    /// Bias slope per unit fog fraction above the knee.
    pub fog_slope: f64,
    pub frontal_glare: SunCone,
    pub right_rear: SunCone,
    pub noon_clear: PresetBias,
    pub sunset_clear: PresetBias,
    pub rain_fog: PresetBias,
    pub sun_glare: PresetBias,
    pub night: PresetBias,
    pub custom: PresetBias,
}

impl Default for DegradationTable {
    fn default() -> Self {
        DegradationTable {
            base_lateral_error_std: 0.15,
            lateral_error_timescale: 2.0,
            distance_noise_std: 0.02,
            detection_range: 120.0,
            fog_knee: 0.40,
            fog_slope: 1.0,
            frontal_glare: SunCone {
                center_deg: 0.0,
                half_width_deg: 20.0,
                max_altitude_deg: 25.0,
                factor: 0.85,
            },
            right_rear: SunCone {
                center_deg: -135.0,
                half_width_deg: 35.0,
                max_altitude_deg: 40.0,
                factor: 1.20,
            },
            noon_clear: PresetBias {
                sedan: 1.05,
                ambulance: 0.97,
                lateral_factor: 1.0,
            },
            sunset_clear: PresetBias {
                sedan: 1.12,
                ambulance: 1.02,
                lateral_factor: 1.1,
            },
            rain_fog: PresetBias {
                sedan: 1.18,
                ambulance: 1.08,
                lateral_factor: 2.0,
            },
            sun_glare: PresetBias {
                sedan: 1.00,
                ambulance: 0.95,
                lateral_factor: 1.5,
            },
            night: PresetBias {
                sedan: 1.30,
                ambulance: 1.15,
                lateral_factor: 2.6,
            },
            custom: PresetBias {
                sedan: 1.0,
                ambulance: 1.0,
                lateral_factor: 1.0,
            },
        }
    }
}

impl DegradationTable {
    pub fn preset(&self, preset: WeatherPreset) -> &PresetBias {
        match preset {
            WeatherPreset::NoonClear => &self.noon_clear,
            WeatherPreset::SunsetClear => &self.sunset_clear,
            WeatherPreset::RainFog => &self.rain_fog,
            WeatherPreset::SunGlare => &self.sun_glare,
            WeatherPreset::Night => &self.night,
            WeatherPreset::Custom => &self.custom,
        }
    }

    /// Piecewise-linear fog bias: flat below the knee, linear above.
    pub fn fog_factor(&self, fog_fraction: f64) -> f64 {
        if fog_fraction < self.fog_knee {
            1.0
        } else {
            1.0 + self.fog_slope * (fog_fraction - self.fog_knee)
        }
    }

    /// Combined sun-cone factor for a given relative azimuth and altitude.
    pub fn sun_factor(&self, rel_azimuth_deg: f64, altitude_deg: f64) -> f64 {
        self.frontal_glare.factor(rel_azimuth_deg, altitude_deg)
            * self.right_rear.factor(rel_azimuth_deg, altitude_deg)
    }
}

/// Per-run overrides of the composed degradation, used by sweeps and
/// bias-causality experiments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationOverrides {
    /// Replace the preset base bias (fog/sun factors still compose on top).
    pub base_bias: Option<f64>,
    /// Replace the fully composed bias.
    pub distance_bias: Option<f64>,
    /// Replace the preset lateral factor.
    pub lateral_factor: Option<f64>,
    pub distance_noise_std: Option<f64>,
    pub detection_range: Option<f64>,
}

/// Compose the effective degradation for one frame from the environment,
/// the instantaneous ego heading, the preset table, and any overrides.
pub fn degradation_from_environment(
    env: &Environment,
    ego_heading: f64,
    table: &DegradationTable,
    overrides: &DegradationOverrides,
) -> DegradationParams {
    let preset = table.preset(env.preset);
    let base = overrides.base_bias.unwrap_or(preset.bias_for(env.lead_class));
    let fog = table.fog_factor(env.fog_fraction);
    let sun = if env.night {
        1.0
    } else {
        let rel_az = env.sun_azimuth - ego_heading.to_degrees();
        table.sun_factor(rel_az, env.sun_altitude)
    };
    let lateral_factor = overrides.lateral_factor.unwrap_or(preset.lateral_factor);
    DegradationParams {
        distance_bias: overrides.distance_bias.unwrap_or(base * fog * sun),
        distance_noise_std: overrides
            .distance_noise_std
            .unwrap_or(table.distance_noise_std),
        lateral_error_std: table.base_lateral_error_std * lateral_factor,
        lateral_error_timescale: table.lateral_error_timescale,
        detection_range: overrides.detection_range.unwrap_or(table.detection_range),
    }
}

/// Produce one perception frame and advance the correlated-error state.
///
/// `lane_anchor` is the lane centerline point 0.5 s ahead of the ego at its
/// current speed (with lane heading); the predicted position is that point
/// displaced laterally by the mean-reverting error.
pub fn perceive<R: Rng>(
    ego: &EgoState,
    lead: &LeadState,
    lane_anchor: Pose,
    params: &DegradationParams,
    state: &PerceptionState,
    dt: f64,
    rng: &mut R,
) -> (PerceptionFrame, PerceptionState) {
    debug_assert!(dt > 0.0);
    let d = lead_distance(ego, lead);
    let (detection, perceived_distance) = if d > 0.0 && d <= params.detection_range {
        let eps: f64 = StandardNormal.sample(rng);
        let dhat = params.distance_bias * d * (1.0 + params.distance_noise_std * eps);
        (true, Some(dhat.max(1e-3)))
    } else {
        (false, None)
    };

    // AR(1) step with the stationary std pinned to lateral_error_std.
    let phi = (-dt / params.lateral_error_timescale).exp();
    let eta: f64 = StandardNormal.sample(rng);
    let lateral_error =
        phi * state.lateral_error + (1.0 - phi * phi).sqrt() * params.lateral_error_std * eta;

    let (sin_h, cos_h) = lane_anchor.heading.sin_cos();
    let predicted = Pose::new(
        lane_anchor.x - sin_h * lateral_error,
        lane_anchor.y + cos_h * lateral_error,
        lane_anchor.heading,
    );

    (
        PerceptionFrame {
            perceived_distance,
            predicted_pose_500ms: predicted,
            detection,
        },
        PerceptionState { lateral_error },
    )
}
