//! Metric computation and correlation tables from stored logs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    build_tables, mean_centerline_distance, mean_detection_ratio, mean_following_distance,
    min_ttc, ConditionGroup, CorrelationTables, MetricRecord,
};
use crate::scenario::Road;
use crate::world::{DrivingType, Modality, RunLog, Terminal};

use super::config::Config;
use super::logio::{from_csv, RunMeta};
use super::suite::SuiteSummary;
use super::HarnessError;

/// DR lower-distance window for Stopping runs, m.
pub const STOPPING_DR_WINDOW: f64 = 10.0;

/// One analyzed run: identity plus its metric values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub condition_id: String,
    pub condition_label: String,
    pub driving: DrivingType,
    pub modality: Modality,
    pub terminal: Terminal,
    pub metrics: MetricRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub config_digest: String,
    pub rows: Vec<MetricRow>,
    pub tables: CorrelationTables,
}

/// Read the suite summary written by `run`.
pub fn load_summary(out_dir: &Path) -> Result<SuiteSummary, HarnessError> {
    let path = out_dir.join("summary.json");
    if !path.exists() {
        return Err(HarnessError::NoRunLogs {
            dir: out_dir.display().to_string(),
        });
    }
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::Io {
        context: format!("reading {}", path.display()),
        source: e,
    })?;
    let summary: SuiteSummary = serde_json::from_str(&text).map_err(|e| HarnessError::Config {
        message: format!("summary.json: {e}"),
    })?;
    if summary.runs.is_empty() {
        return Err(HarnessError::NoRunLogs {
            dir: out_dir.display().to_string(),
        });
    }
    Ok(summary)
}

/// Load one run log through its summary entry.
pub fn load_log(out_dir: &Path, meta: &RunMeta) -> Result<RunLog, HarnessError> {
    let path = out_dir.join(&meta.log_file);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::Io {
        context: format!("reading {}", path.display()),
        source: e,
    })?;
    from_csv(&text, meta)
}

/// Compute every metric for one run.
pub fn metrics_for(log: &RunLog, road: &Road, meta: &RunMeta) -> Result<MetricRecord, HarnessError> {
    let dr_window = match meta.driving {
        DrivingType::Stopping => STOPPING_DR_WINDOW,
        DrivingType::Following => 0.0,
    };
    let err = |source: crate::analysis::AnalysisError| HarnessError::Analysis {
        run_id: meta.run_id.clone(),
        source,
    };
    Ok(MetricRecord {
        run_id: meta.run_id.clone(),
        cd: mean_centerline_distance(log, road, false).map_err(err)?,
        cd_hat: mean_centerline_distance(log, road, true).map_err(err)?,
        fd: mean_following_distance(log).map_err(err)?,
        min_ttc: min_ttc(log).map_err(err)?,
        dr: mean_detection_ratio(log, dr_window).map_err(err)?,
        dr_window,
    })
}

/// Analyze all stored logs: per-run metrics plus the diagnosis/prediction
/// tables, persisted as `metrics.json` and `tables.json`.
pub fn analyze(config: &Config, out_dir: &Path) -> Result<AnalysisOutput, HarnessError> {
    let summary = load_summary(out_dir)?;
    let road = config.scenario.road()?;

    let mut rows = Vec::with_capacity(summary.runs.len());
    for meta in &summary.runs {
        let log = load_log(out_dir, meta)?;
        let metrics = metrics_for(&log, &road, meta)?;
        rows.push(MetricRow {
            run_id: meta.run_id.clone(),
            condition_id: meta.condition_id.clone(),
            condition_label: meta.condition_label.clone(),
            driving: meta.driving,
            modality: meta.modality,
            terminal: meta.terminal,
            metrics,
        });
    }

    let tables = build_tables(
        &group_by_condition(&rows, Modality::Vil),
        &group_by_condition(&rows, Modality::Mil),
    )
    .map_err(|source| HarnessError::Analysis {
        run_id: "<tables>".into(),
        source,
    })?;

    let output = AnalysisOutput {
        config_digest: summary.config_digest.clone(),
        rows,
        tables,
    };
    write_json(out_dir, "metrics.json", &output.rows)?;
    write_json(out_dir, "tables.json", &output.tables)?;
    Ok(output)
}

/// Group per-run metrics by (driving type, environment condition).
pub fn group_by_condition(rows: &[MetricRow], modality: Modality) -> Vec<ConditionGroup> {
    let mut grouped: BTreeMap<(String, String), ConditionGroup> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.modality == modality) {
        let key = (row.driving.label().to_string(), row.condition_label.clone());
        grouped
            .entry(key)
            .or_insert_with(|| ConditionGroup {
                condition: row.condition_label.clone(),
                driving: row.driving,
                records: Vec::new(),
            })
            .records
            .push(row.metrics.clone());
    }
    grouped.into_values().collect()
}

pub(super) fn write_json<T: Serialize>(
    out_dir: &Path,
    name: &str,
    value: &T,
) -> Result<(), HarnessError> {
    let path = out_dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(&path, text).map_err(|e| HarnessError::Io {
        context: format!("writing {}", path.display()),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_on_empty_directory_reports_no_logs() {
        let dir = tempfile::tempdir().unwrap();
        let err = analyze(&Config::default(), dir.path()).unwrap_err();
        assert!(matches!(err, HarnessError::NoRunLogs { .. }));
        assert!(err.to_string().contains("no run logs found"));
    }
}
