//! Run-log persistence: CSV with a fixed column order, one row per 20 Hz
//! sample, numbers at 9 significant digits so determinism checks can compare
//! files byte for byte.

use serde::{Deserialize, Serialize};

use crate::world::{
    DrivingType, EgoState, Environment, LeadState, Modality, Pose, RunLog, SampleRecord, Terminal,
};

use super::HarnessError;

/// Mandatory header row.
pub const CSV_HEADER: &str = "t,ego_x,ego_y,ego_heading,ego_v,ego_v_est,steer_wheel_angle,\
lead_x,lead_y,lead_v,d,d_hat,pred_x_500,pred_y_500,accel_cmd,steer_cmd";

/// Identity and outcome of one run; the suite summary carries one per run
/// and is what `analyze` uses to reconstruct logs from CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub condition_id: String,
    /// Environment condition label ("preset/lead") used for grouping.
    pub condition_label: String,
    pub driving: DrivingType,
    pub modality: Modality,
    pub environment: Environment,
    pub seed: u64,
    pub terminal: Terminal,
    pub records: usize,
    /// Path of the CSV log, relative to the output directory.
    pub log_file: String,
    pub config_digest: String,
}

/// Render one number with 9 significant digits.
fn fmt9(x: f64) -> String {
    debug_assert!(x.is_finite());
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

/// Serialize a run log to CSV text.
pub fn to_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(64 + log.records.len() * 180);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &log.records {
        let dhat = r
            .perceived_distance
            .map(|d| fmt9(d))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt9(r.t),
            fmt9(r.ego.pose.x),
            fmt9(r.ego.pose.y),
            fmt9(r.ego.pose.heading),
            fmt9(r.ego.speed),
            fmt9(r.ego.speed_estimate),
            fmt9(r.ego.steer_wheel_angle),
            fmt9(r.lead.pose.x),
            fmt9(r.lead.pose.y),
            fmt9(r.lead.speed),
            fmt9(r.true_distance),
            dhat,
            fmt9(r.predicted_pose_500ms.x),
            fmt9(r.predicted_pose_500ms.y),
            fmt9(r.accel_cmd),
            fmt9(r.steer_cmd),
        ));
    }
    out
}

fn parse_field(field: &str, name: &str, line: usize) -> Result<f64, HarnessError> {
    field.parse::<f64>().map_err(|_| HarnessError::LogFormat {
        message: format!("line {line}: bad {name} value {field:?}"),
    })
}

/// Parse CSV text back into a run log, using the run metadata for the fields
/// the CSV does not carry (modality, environment, terminal, seed).
pub fn from_csv(text: &str, meta: &RunMeta) -> Result<RunLog, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(HarnessError::LogFormat {
                message: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(HarnessError::LogFormat {
                message: "empty log file".into(),
            })
        }
    }
    let rear_offset = meta.environment.lead_class.rear_offset();
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 16 {
            return Err(HarnessError::LogFormat {
                message: format!("line {}: expected 16 fields, got {}", idx + 1, fields.len()),
            });
        }
        let num = |i: usize, name: &str| parse_field(fields[i], name, idx + 1);
        let perceived = if fields[11].is_empty() {
            None
        } else {
            Some(parse_field(fields[11], "d_hat", idx + 1)?)
        };
        records.push(SampleRecord {
            t: num(0, "t")?,
            ego: EgoState {
                pose: Pose::new(num(1, "ego_x")?, num(2, "ego_y")?, num(3, "ego_heading")?),
                speed: num(4, "ego_v")?,
                speed_estimate: num(5, "ego_v_est")?,
                steer_wheel_angle: num(6, "steer_wheel_angle")?,
                accel_actual: 0.0,
                slip_angle: 0.0,
            },
            lead: LeadState {
                pose: Pose::new(num(7, "lead_x")?, num(8, "lead_y")?, 0.0),
                speed: num(9, "lead_v")?,
                rear_offset,
            },
            true_distance: num(10, "d")?,
            perceived_distance: perceived,
            predicted_pose_500ms: Pose::new(num(12, "pred_x_500")?, num(13, "pred_y_500")?, 0.0),
            accel_cmd: num(14, "accel_cmd")?,
            steer_cmd: num(15, "steer_cmd")?,
        });
    }
    Ok(RunLog {
        config_digest: meta.config_digest.clone(),
        modality: meta.modality,
        driving_type: meta.driving,
        environment: meta.environment,
        seed: meta.seed,
        records,
        terminal: meta.terminal,
    })
}
