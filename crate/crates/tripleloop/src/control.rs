//! SAE-L2-style controller: longitudinal gap/stop/cruise control plus
//! pure-pursuit lateral control on the 500 ms prediction point.
//!
//! Longitudinal control is a proportional gap-and-rate law with saturation,
//! capped by a cruise PI so the set speed is never exceeded. Lead speed is
//! inferred from perceived-distance differences through a low-pass; the rate
//! estimate refreshes only when a new perception frame arrives (frames are
//! zero-order held between 20 Hz refreshes while the controller runs every
//! 10 ms tick).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::PerceptionFrame;
use crate::world::{Pose, VehicleParams, LOG_PERIOD};

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("pursuit target is not ahead of the ego (longitudinal component {0} m)")]
    TargetBehind(f64),
}

/// Longitudinal gains and gap policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    /// Gap-error gain k_d, 1/s^2.
    pub gap_gain: f64,
    /// Speed-error gain k_v, 1/s.
    pub speed_gain: f64,
    pub cruise_kp: f64,
    pub cruise_ki: f64,
    /// Stopped-gap target d_min, m.
    pub standoff: f64,
    /// Time headway tau_h, s.
    pub time_headway: f64,
    /// Low-pass time constant of the lead-rate estimate, s.
    pub lead_lowpass_tau: f64,
}

impl Default for ControllerGains {
    /// The longitudinal plant is an integrator, so the cruise loop holds the
    /// set speed without an integral term; cruise_ki stays available for
    /// plants with drag.
    fn default() -> Self {
        ControllerGains {
            gap_gain: 0.6,
            speed_gain: 0.8,
            cruise_kp: 0.8,
            cruise_ki: 0.0,
            standoff: 2.5,
            time_headway: 1.45,
            lead_lowpass_tau: 0.5,
        }
    }
}

/// Mutable longitudinal-controller state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub set_speed: f64,
    /// Low-passed d(d_hat)/dt; relative speed of the lead, m/s.
    pub lead_speed_estimate: f64,
    pub prev_perceived_distance: Option<f64>,
    /// Cruise PI integral term, m/s^2.
    pub integrator: f64,
    pub standoff: f64,
    pub time_headway: f64,
}

impl ControllerState {
    pub fn new(set_speed: f64, gains: &ControllerGains) -> Self {
        ControllerState {
            set_speed,
            lead_speed_estimate: 0.0,
            prev_perceived_distance: None,
            integrator: 0.0,
            standoff: gains.standoff,
            time_headway: gains.time_headway,
        }
    }
}

/// Desired following gap at a given ego speed.
pub fn target_gap(v_ego: f64, state: &ControllerState) -> f64 {
    state.standoff + state.time_headway * v_ego
}

/// One longitudinal control tick. Returns the acceleration command (clamped
/// to `accel_limits`) and the updated state.
pub fn longitudinal_command(
    frame: &PerceptionFrame,
    v_ego_est: f64,
    state: &ControllerState,
    dt: f64,
    gains: &ControllerGains,
    accel_limits: [f64; 2],
) -> (f64, ControllerState) {
    debug_assert!(dt > 0.0);
    let mut st = *state;

    // Lead-rate estimate: refresh only on new frames (the perceived distance
    // changes when a frame is recomputed; frames are held between refreshes).
    if frame.detection {
        let dhat = frame
            .perceived_distance
            .expect("detection implies a perceived distance");
        if st.prev_perceived_distance != Some(dhat) {
            if let Some(prev) = st.prev_perceived_distance {
                let raw_rate = (dhat - prev) / LOG_PERIOD;
                let alpha = 1.0 - (-LOG_PERIOD / gains.lead_lowpass_tau).exp();
                st.lead_speed_estimate += alpha * (raw_rate - st.lead_speed_estimate);
            } else {
                st.lead_speed_estimate = 0.0;
            }
            st.prev_perceived_distance = Some(dhat);
        }
    } else {
        st.prev_perceived_distance = None;
        st.lead_speed_estimate = 0.0;
    }

    // Cruise PI toward the set speed, with integration gated off while the
    // proportional path is saturated.
    let v_err = st.set_speed - v_ego_est;
    let proportional = gains.cruise_kp * v_err;
    if proportional > accel_limits[0] && proportional < accel_limits[1] {
        st.integrator = (st.integrator + gains.cruise_ki * v_err * dt).clamp(-1.0, 1.0);
    }
    let a_cruise = (proportional + st.integrator).clamp(accel_limits[0], accel_limits[1]);

    let accel = if frame.detection {
        let dhat = frame.perceived_distance.unwrap();
        let v_lead = (v_ego_est + st.lead_speed_estimate).max(0.0);
        let a_gap = gains.gap_gain * (dhat - target_gap(v_ego_est, &st))
            + gains.speed_gain * (v_lead - v_ego_est);
        // The cruise command caps the gap law so the set speed is never
        // exceeded while closing a large gap.
        a_gap.min(a_cruise).clamp(accel_limits[0], accel_limits[1])
    } else {
        a_cruise
    };

    (accel, st)
}

/// Pure pursuit on the prediction point: returns the steering-wheel command.
pub fn lateral_command(
    ego_pose: Pose,
    target: Pose,
    v_ego: f64,
    params: &VehicleParams,
) -> Result<f64, ControlError> {
    debug_assert!(v_ego >= 0.0);
    let dx = target.x - ego_pose.x;
    let dy = target.y - ego_pose.y;
    let (sin_h, cos_h) = ego_pose.heading.sin_cos();
    // Target in the ego frame.
    let forward = dx * cos_h + dy * sin_h;
    let left = -dx * sin_h + dy * cos_h;
    if forward <= 0.0 {
        return Err(ControlError::TargetBehind(forward));
    }
    let alpha = left.atan2(forward);
    let lookahead = (dx.hypot(dy)).max(1.0);
    let curvature = 2.0 * alpha.sin() / lookahead;
    let steer = (curvature * params.wheelbase).atan() * params.steering_ratio;
    Ok(steer.clamp(-params.steer_limit, params.steer_limit))
}
