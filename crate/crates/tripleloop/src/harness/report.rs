//! Report emission: per-condition metric bars, deceleration and
//! detection-ratio curves over the 10-50 m approach window, correlation
//! scatter data with regression lines and min-max ovals, and the compact
//! correlation table.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{sample_mean, sample_minmax};
use crate::world::{DrivingType, Modality, Terminal};

use super::analyze::{analyze, load_log, load_summary, write_json, AnalysisOutput};
use super::config::Config;
use super::HarnessError;

/// Distance window of the approach curves, m.
pub const CURVE_WINDOW: (f64, f64) = (10.0, 50.0);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricBar {
    pub driving: DrivingType,
    pub modality: Modality,
    pub condition: String,
    pub metric: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub table: String,
    pub driving: DrivingType,
    pub predictive: String,
    pub response: String,
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Emit all report files under `<out>/report/`. Runs the analysis stage if
/// its outputs are not already on disk.
pub fn emit_reports(config: &Config, out_dir: &Path) -> Result<AnalysisOutput, HarnessError> {
    let output = analyze(config, out_dir)?;
    let summary = load_summary(out_dir)?;
    let report_dir = out_dir.join("report");
    fs::create_dir_all(&report_dir).map_err(|e| HarnessError::Io {
        context: format!("creating {}", report_dir.display()),
        source: e,
    })?;

    // (a) Per-condition metric bars with min-max whiskers.
    let mut bars: Vec<MetricBar> = Vec::new();
    let mut grouped: BTreeMap<(String, String, String), Vec<&super::analyze::MetricRow>> =
        BTreeMap::new();
    for row in &output.rows {
        grouped
            .entry((
                row.driving.label().to_string(),
                row.modality.label().to_string(),
                row.condition_label.clone(),
            ))
            .or_default()
            .push(row);
    }
    for ((_, _, condition), rows) in &grouped {
        let first = rows[0];
        for (metric, values) in [
            ("cd", rows.iter().map(|r| r.metrics.cd).collect::<Vec<_>>()),
            ("fd", rows.iter().map(|r| r.metrics.fd).collect()),
            ("min_ttc", rows.iter().map(|r| r.metrics.min_ttc).collect()),
        ] {
            let mean = sample_mean(&values).expect("non-empty group");
            let (min, max) = sample_minmax(&values).expect("non-empty group");
            bars.push(MetricBar {
                driving: first.driving,
                modality: first.modality,
                condition: condition.clone(),
                metric: metric.into(),
                mean,
                min,
                max,
                runs: values.len(),
            });
        }
    }
    write_json(out_dir, "report/condition_metrics.json", &bars)?;

    // (b) Approach-window curves for the Stopping runs.
    let mut decel = String::from("run_id,modality,condition,d,accel_cmd\n");
    let mut ratio = String::from("run_id,modality,condition,d,detection_ratio\n");
    for meta in summary
        .runs
        .iter()
        .filter(|m| m.driving == DrivingType::Stopping)
    {
        let log = load_log(out_dir, meta)?;
        for rec in &log.records {
            let d = rec.true_distance;
            if d <= CURVE_WINDOW.0 || d >= CURVE_WINDOW.1 {
                continue;
            }
            decel.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                meta.run_id, meta.modality.label(), meta.condition_label, d, rec.accel_cmd
            ));
            if let Some(dhat) = rec.perceived_distance {
                ratio.push_str(&format!(
                    "{},{},{},{:.6},{:.9}\n",
                    meta.run_id,
                    meta.modality.label(),
                    meta.condition_label,
                    d,
                    dhat / d
                ));
            }
        }
    }
    fs::write(report_dir.join("decel_curves.csv"), decel).map_err(|e| HarnessError::Io {
        context: "writing report/decel_curves.csv".into(),
        source: e,
    })?;
    fs::write(report_dir.join("detection_ratio_curves.csv"), ratio).map_err(|e| {
        HarnessError::Io {
            context: "writing report/detection_ratio_curves.csv".into(),
            source: e,
        }
    })?;

    // (c) Scatter data with regression lines and min-max ovals.
    write_json(out_dir, "report/diagnosis_scatter.json", &output.tables.diagnosis)?;
    write_json(out_dir, "report/prediction_scatter.json", &output.tables.prediction)?;

    // (d) The compact correlation table: three diagnosis rows and three
    // prediction rows.
    let mut table: Vec<CorrelationRow> = Vec::new();
    for (name, rows) in [
        ("diagnosis", &output.tables.diagnosis),
        ("prediction", &output.tables.prediction),
    ] {
        for row in rows.iter() {
            table.push(CorrelationRow {
                table: name.into(),
                driving: row.driving,
                predictive: row.predictive.clone(),
                response: row.response.clone(),
                r: row.result.r,
                p_value: row.result.p_value,
                n: row.result.n,
            });
        }
    }
    write_json(out_dir, "report/correlation_table.json", &table)?;

    // Sanity row: collision runs must surface as zero-TTC bars.
    debug_assert!(output
        .rows
        .iter()
        .filter(|r| r.terminal == Terminal::Collision)
        .all(|r| r.metrics.min_ttc == 0.0));

    Ok(output)
}
