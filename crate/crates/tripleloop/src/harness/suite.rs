//! Experiment-suite execution: expands the condition matrix into runs,
//! enforces the MIL rail dependency, fans runs out to a bounded worker pool,
//! and persists logs plus a summary index.
//!
//! MIL conditions replay the VIL night/sedan trajectories of the same driving
//! type and run index, regardless of the environment being rendered to
//! perception. All file writes happen after the runs complete, in plan
//! order, so outputs are byte-identical for any worker count.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RailTrajectory;
use crate::perception::DegradationOverrides;
use crate::runner::{extract_rail, run, RunConfig};
use crate::world::{derive_run_seed, DrivingType, LeadClass, Modality, RunLog, WeatherPreset};

use super::config::Config;
use super::logio::{to_csv, RunMeta};
use super::HarnessError;

/// The rail-source condition all MIL runs replay.
pub const RAIL_PRESET: WeatherPreset = WeatherPreset::Night;
pub const RAIL_LEAD: LeadClass = LeadClass::BlackSedan;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub name: String,
    pub base_seed: u64,
    pub config_digest: String,
    pub runs: Vec<RunMeta>,
}

/// One planned run, in deterministic plan order.
#[derive(Debug, Clone)]
struct PlannedRun {
    run_id: String,
    condition_id: String,
    condition_label: String,
    driving: DrivingType,
    modality: Modality,
    condition_index: usize,
    run_index: u32,
    seed: u64,
}

fn plan(config: &Config, base_seed: u64) -> Vec<PlannedRun> {
    let mut out = Vec::new();
    for (ci, cond) in config.suite.conditions.iter().enumerate() {
        for &modality in &cond.modalities {
            let condition_id = format!(
                "{}/{}/{}/{}",
                cond.driving.label(),
                modality.label(),
                cond.preset.label(),
                cond.lead.label()
            );
            for run_index in 0..cond.runs {
                out.push(PlannedRun {
                    run_id: format!(
                        "{}_{}_{}_{}__r{}",
                        cond.driving.label(),
                        modality.label(),
                        cond.preset.label(),
                        cond.lead.label(),
                        run_index
                    ),
                    condition_id: condition_id.clone(),
                    condition_label: cond.label(),
                    driving: cond.driving,
                    modality,
                    condition_index: ci,
                    run_index,
                    seed: derive_run_seed(base_seed, &condition_id, run_index),
                });
            }
        }
    }
    out
}

fn build_run_config(
    config: &Config,
    planned: &PlannedRun,
    rail: Option<Arc<RailTrajectory>>,
    digest: &str,
) -> Result<RunConfig, HarnessError> {
    let cond = &config.suite.conditions[planned.condition_index];
    Ok(RunConfig {
        modality: planned.modality,
        scenario: config.scenario.spec(cond.driving, cond.lead)?,
        environment: cond.environment(),
        vehicle: config.vehicle,
        gains: config.controller,
        plant: config.plant,
        degradation: config.perception_presets,
        overrides: DegradationOverrides::default(),
        seed: planned.seed,
        rail,
        config_digest: digest.to_string(),
    })
}

/// Check the MIL dependency: every MIL condition needs VIL night/sedan runs
/// of the same driving type, at least as many as it will replay.
fn check_rail_dependency(config: &Config) -> Result<(), HarnessError> {
    for driving in [DrivingType::Stopping, DrivingType::Following] {
        let mil_runs = config
            .suite
            .conditions
            .iter()
            .filter(|c| c.driving == driving && c.modalities.contains(&Modality::Mil))
            .map(|c| c.runs)
            .max();
        let Some(mil_runs) = mil_runs else { continue };
        let vil_source_runs = config
            .suite
            .conditions
            .iter()
            .filter(|c| {
                c.driving == driving
                    && c.preset == RAIL_PRESET
                    && c.lead == RAIL_LEAD
                    && c.modalities.contains(&Modality::Vil)
            })
            .map(|c| c.runs)
            .max()
            .unwrap_or(0);
        if vil_source_runs < mil_runs {
            return Err(HarnessError::RailDependency {
                driving: driving.label(),
                needed: mil_runs,
                available: vil_source_runs,
            });
        }
    }
    Ok(())
}

/// Execute the VIL night/sedan rail-source run for one driving type and run
/// index with suite-identical seeding, and extract its rail.
pub fn rail_for(
    config: &Config,
    base_seed: u64,
    driving: DrivingType,
    run_index: u32,
    digest: &str,
) -> Result<(RunLog, Arc<RailTrajectory>), HarnessError> {
    let condition_id = format!(
        "{}/vil/{}/{}",
        driving.label(),
        RAIL_PRESET.label(),
        RAIL_LEAD.label()
    );
    let run_config = RunConfig {
        modality: Modality::Vil,
        scenario: config.scenario.spec(driving, RAIL_LEAD)?,
        environment: crate::world::Environment::preset(RAIL_PRESET, RAIL_LEAD),
        vehicle: config.vehicle,
        gains: config.controller,
        plant: config.plant,
        degradation: config.perception_presets,
        overrides: DegradationOverrides::default(),
        seed: derive_run_seed(base_seed, &condition_id, run_index),
        rail: None,
        config_digest: digest.to_string(),
    };
    let log = run(&run_config)?;
    let rail = extract_rail(&log, &config.vehicle)?;
    Ok((log, Arc::new(rail)))
}

/// Run the whole suite and persist logs plus the summary index.
pub fn run_suite(
    config: &Config,
    base_seed: u64,
    jobs: usize,
    out_dir: &Path,
) -> Result<SuiteSummary, HarnessError> {
    check_rail_dependency(config)?;
    let digest = config.digest();
    let planned = plan(config, base_seed);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config {
            message: format!("worker pool: {e}"),
        })?;

    // Phase 1: rail-source runs (VIL night/sedan), reused by every MIL run
    // of the same driving type and index.
    let mut rail_indices: HashMap<DrivingType, u32> = HashMap::new();
    for cond in &config.suite.conditions {
        if cond.modalities.contains(&Modality::Mil) {
            let entry = rail_indices.entry(cond.driving).or_insert(0);
            *entry = (*entry).max(cond.runs);
        }
    }
    let mut rail_tasks: Vec<(DrivingType, u32)> = Vec::new();
    for (driving, count) in [DrivingType::Stopping, DrivingType::Following]
        .iter()
        .filter_map(|d| rail_indices.get(d).map(|c| (*d, *c)))
    {
        for i in 0..count {
            rail_tasks.push((driving, i));
        }
    }
    let rails: HashMap<(DrivingType, u32), (RunLog, Arc<RailTrajectory>)> = pool.install(|| {
        rail_tasks
            .par_iter()
            .map(|&(driving, i)| {
                rail_for(config, base_seed, driving, i, &digest).map(|r| ((driving, i), r))
            })
            .collect::<Result<HashMap<_, _>, _>>()
    })?;

    // Phase 2: all planned runs. Rail-source runs are reused, not re-run.
    let results: Vec<(RunMeta, RunLog, String)> = pool.install(|| {
        planned
            .par_iter()
            .map(|p| -> Result<(RunMeta, RunLog, String), HarnessError> {
                let is_rail_source = p.modality == Modality::Vil
                    && config.suite.conditions[p.condition_index].preset == RAIL_PRESET
                    && config.suite.conditions[p.condition_index].lead == RAIL_LEAD;
                let log = if is_rail_source {
                    if let Some((log, _)) = rails.get(&(p.driving, p.run_index)) {
                        log.clone()
                    } else {
                        run(&build_run_config(config, p, None, &digest)?)?
                    }
                } else {
                    let rail = match p.modality {
                        Modality::Mil => Some(
                            rails
                                .get(&(p.driving, p.run_index))
                                .map(|(_, rail)| rail.clone())
                                .ok_or(HarnessError::RailDependency {
                                    driving: p.driving.label(),
                                    needed: p.run_index + 1,
                                    available: 0,
                                })?,
                        ),
                        _ => None,
                    };
                    run(&build_run_config(config, p, rail, &digest)?)?
                };
                let csv = to_csv(&log);
                let meta = RunMeta {
                    run_id: p.run_id.clone(),
                    condition_id: p.condition_id.clone(),
                    condition_label: p.condition_label.clone(),
                    driving: p.driving,
                    modality: p.modality,
                    environment: log.environment,
                    seed: p.seed,
                    terminal: log.terminal,
                    records: log.records.len(),
                    log_file: format!("logs/{}.csv", p.run_id),
                    config_digest: digest.clone(),
                };
                Ok((meta, log, csv))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Single-writer persistence in plan order.
    let logs_dir = out_dir.join("logs");
    fs::create_dir_all(&logs_dir).map_err(|e| HarnessError::Io {
        context: format!("creating {}", logs_dir.display()),
        source: e,
    })?;
    let mut summary = SuiteSummary {
        name: config.suite.name.clone(),
        base_seed,
        config_digest: digest,
        runs: Vec::with_capacity(results.len()),
    };
    for (meta, _log, csv) in &results {
        let path = out_dir.join(&meta.log_file);
        fs::write(&path, csv).map_err(|e| HarnessError::Io {
            context: format!("writing {}", path.display()),
            source: e,
        })?;
        summary.runs.push(meta.clone());
    }
    let summary_path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, text).map_err(|e| HarnessError::Io {
        context: format!("writing {}", summary_path.display()),
        source: e,
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Terminal;

    fn small_config() -> Config {
        let mut config = Config::default();
        config.suite.name = "small".into();
        config.suite.conditions = vec![
            super::super::config::ConditionConfig {
                driving: DrivingType::Stopping,
                preset: WeatherPreset::Night,
                lead: LeadClass::BlackSedan,
                runs: 2,
                modalities: vec![Modality::Vil, Modality::Mil],
                environment: None,
            },
            super::super::config::ConditionConfig {
                driving: DrivingType::Stopping,
                preset: WeatherPreset::SunGlare,
                lead: LeadClass::Ambulance,
                runs: 2,
                modalities: vec![Modality::Vil, Modality::Sil, Modality::Mil],
                environment: None,
            },
        ];
        config
    }

    #[test]
    fn suite_lists_every_run_once_with_terminal_status() {
        let config = small_config();
        let dir = tempfile::tempdir().unwrap();
        let summary = run_suite(&config, 11, 2, dir.path()).unwrap();
        assert_eq!(summary.runs.len(), 2 + 2 + 2 + 2 + 2);
        let mut ids: Vec<&str> = summary.runs.iter().map(|r| r.run_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), summary.runs.len());
        for r in &summary.runs {
            assert!(dir.path().join(&r.log_file).exists());
            assert!(matches!(
                r.terminal,
                Terminal::Stopped | Terminal::Collision | Terminal::DistanceComplete | Terminal::Timeout
            ));
        }
    }

    #[test]
    fn missing_rail_source_fails_before_running() {
        let mut config = small_config();
        config.suite.conditions.remove(0); // drop the VIL night/sedan source
        let dir = tempfile::tempdir().unwrap();
        let err = run_suite(&config, 11, 1, dir.path()).unwrap_err();
        assert!(matches!(err, HarnessError::RailDependency { .. }));
        // Nothing was written.
        assert!(!dir.path().join("summary.json").exists());
    }

    #[test]
    fn worker_count_does_not_change_outputs() {
        let config = small_config();
        let dir1 = tempfile::tempdir().unwrap();
        let dir8 = tempfile::tempdir().unwrap();
        let s1 = run_suite(&config, 5, 1, dir1.path()).unwrap();
        let s8 = run_suite(&config, 5, 8, dir8.path()).unwrap();
        assert_eq!(s1.runs.len(), s8.runs.len());
        for (a, b) in s1.runs.iter().zip(s8.runs.iter()) {
            assert_eq!(a, b);
            let bytes1 = fs::read(dir1.path().join(&a.log_file)).unwrap();
            let bytes8 = fs::read(dir8.path().join(&b.log_file)).unwrap();
            assert_eq!(bytes1, bytes8, "log {} differs", a.run_id);
        }
        let sum1 = fs::read(dir1.path().join("summary.json")).unwrap();
        let sum8 = fs::read(dir8.path().join("summary.json")).unwrap();
        assert_eq!(sum1, sum8);
    }
}
