//! MIL perception sweeps: fog level and sun angle.
//!
//! Both sweeps replay the first VIL night/sedan Stopping trajectory while
//! rendering a parameterized environment to perception, then reduce each run
//! to its mean detection ratio. The fog sweep additionally fits the
//! above-knee linear trend and, when correlation tables are available,
//! projects each DR through the MIL-to-VIL prediction regression to flag
//! fog levels where a closed-loop collision is expected.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{mean_detection_ratio, pearson, CorrelationTables};
use crate::perception::DegradationOverrides;
use crate::runner::{run, RunConfig};
use crate::world::{
    derive_run_seed, DrivingType, Environment, LeadClass, Modality, WeatherPreset,
};

use super::analyze::STOPPING_DR_WINDOW;
use super::config::Config;
use super::suite::rail_for;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    FogLevel,
    SunAngle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FogPoint {
    pub fog: f64,
    pub dr: f64,
    /// Min-TTC projected through the prediction regression, when available.
    pub predicted_min_ttc: Option<f64>,
    pub collision_flag: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FogSweepResult {
    pub points: Vec<FogPoint>,
    /// Mean DR over the flat region below the knee.
    pub flat_mean_dr: f64,
    pub knee: f64,
    /// Least-squares DR trend above the knee.
    pub above_knee_slope: f64,
    pub above_knee_intercept: f64,
    pub strictly_increasing_above_knee: bool,
    /// Smallest fog fraction whose projected min-TTC is <= 0.
    pub collision_fog_threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SunPoint {
    pub altitude: f64,
    pub azimuth: f64,
    pub dr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SunSweepResult {
    pub points: Vec<SunPoint>,
    /// Mean DR over cells outside both sun cones.
    pub baseline_dr: f64,
    pub min_dr: f64,
    pub max_dr: f64,
}

fn sweep_run_config(
    config: &Config,
    environment: Environment,
    overrides: DegradationOverrides,
    seed: u64,
    rail: std::sync::Arc<crate::dynamics::RailTrajectory>,
    digest: &str,
) -> Result<RunConfig, HarnessError> {
    Ok(RunConfig {
        modality: Modality::Mil,
        scenario: config.scenario.spec(DrivingType::Stopping, environment.lead_class)?,
        environment,
        vehicle: config.vehicle,
        gains: config.controller,
        plant: config.plant,
        degradation: config.perception_presets,
        overrides,
        seed,
        rail: Some(rail),
        config_digest: digest.to_string(),
    })
}

/// Load `tables.json` if a prior `analyze` produced it.
fn load_tables(out_dir: &Path) -> Option<CorrelationTables> {
    let text = fs::read_to_string(out_dir.join("tables.json")).ok()?;
    serde_json::from_str(&text).ok()
}

/// Run the fog-level sweep and persist `sweeps/fog.csv` plus its summary.
pub fn run_fog_sweep(
    config: &Config,
    base_seed: u64,
    jobs: usize,
    out_dir: &Path,
) -> Result<FogSweepResult, HarnessError> {
    let spec = &config.sweeps.fog;
    if spec.count != 95 {
        eprintln!(
            "warning: fog sweep grid has {} points (the published experiment used 95)",
            spec.count
        );
    }
    let digest = config.digest();
    let (_, rail) = rail_for(config, base_seed, DrivingType::Stopping, 0, &digest)?;

    // The rain/fog environment repeated at each fog level, ambulance lead;
    // the base bias and lateral factor stay pinned to the rain_fog preset.
    let reference = Environment::preset(WeatherPreset::RainFog, LeadClass::Ambulance);
    let overrides = DegradationOverrides {
        base_bias: Some(config.perception_presets.rain_fog.ambulance),
        lateral_factor: Some(config.perception_presets.rain_fog.lateral_factor),
        ..Default::default()
    };

    let grid: Vec<f64> = (0..spec.count)
        .map(|i| {
            if spec.count == 1 {
                spec.start
            } else {
                spec.start + (spec.stop - spec.start) * i as f64 / (spec.count - 1) as f64
            }
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config {
            message: format!("worker pool: {e}"),
        })?;
    let drs: Vec<(f64, f64)> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &fog)| -> Result<(f64, f64), HarnessError> {
                let environment = Environment {
                    preset: WeatherPreset::Custom,
                    fog_fraction: fog,
                    ..reference
                };
                let seed = derive_run_seed(base_seed, "sweep/fog", i as u32);
                let run_config =
                    sweep_run_config(config, environment, overrides, seed, rail.clone(), &digest)?;
                let log = run(&run_config)?;
                let dr =
                    mean_detection_ratio(&log, STOPPING_DR_WINDOW).map_err(|source| {
                        HarnessError::Analysis {
                            run_id: format!("sweep/fog/{i}"),
                            source,
                        }
                    })?;
                Ok((fog, dr))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let knee = config.perception_presets.fog_knee;
    let below: Vec<f64> = drs.iter().filter(|(f, _)| *f < knee).map(|(_, d)| *d).collect();
    let flat_mean_dr = below.iter().sum::<f64>() / below.len().max(1) as f64;
    let above: Vec<(f64, f64)> = drs.iter().filter(|(f, _)| *f >= knee).copied().collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = above.iter().copied().unzip();
    let fit = pearson(&xs, &ys).map_err(|source| HarnessError::Analysis {
        run_id: "sweep/fog/fit".into(),
        source,
    })?;
    let strictly_increasing = above.windows(2).all(|w| w[1].1 > w[0].1);

    // Project DR through the MIL-to-VIL (DR -> min-TTC) prediction line.
    let prediction = load_tables(out_dir).and_then(|t| {
        t.prediction
            .iter()
            .find(|row| row.predictive == "dr" && row.response == "min_ttc")
            .map(|row| (row.result.slope, row.result.intercept))
    });
    let mut points = Vec::with_capacity(drs.len());
    let mut collision_fog_threshold = None;
    for &(fog, dr) in &drs {
        let predicted = prediction.map(|(m, b)| m * dr + b);
        let flag = predicted.map(|p| p <= 0.0);
        if flag == Some(true) && collision_fog_threshold.is_none() {
            collision_fog_threshold = Some(fog);
        }
        points.push(FogPoint {
            fog,
            dr,
            predicted_min_ttc: predicted,
            collision_flag: flag,
        });
    }

    let result = FogSweepResult {
        points,
        flat_mean_dr,
        knee,
        above_knee_slope: fit.slope,
        above_knee_intercept: fit.intercept,
        strictly_increasing_above_knee: strictly_increasing,
        collision_fog_threshold,
    };

    let dir = out_dir.join("sweeps");
    fs::create_dir_all(&dir).map_err(|e| HarnessError::Io {
        context: format!("creating {}", dir.display()),
        source: e,
    })?;
    let mut csv = String::from("fog,dr,predicted_min_ttc,collision_flag\n");
    for p in &result.points {
        csv.push_str(&format!(
            "{:.4},{:.9},{},{}\n",
            p.fog,
            p.dr,
            p.predicted_min_ttc.map(|v| format!("{v:.9}")).unwrap_or_default(),
            p.collision_flag.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    fs::write(dir.join("fog.csv"), csv).map_err(|e| HarnessError::Io {
        context: "writing sweeps/fog.csv".into(),
        source: e,
    })?;
    super::analyze::write_json(out_dir, "sweeps/fog_summary.json", &result)?;
    Ok(result)
}

/// Run the sun-angle sweep and persist `sweeps/sun.csv` plus its summary.
pub fn run_sun_sweep(
    config: &Config,
    base_seed: u64,
    jobs: usize,
    out_dir: &Path,
) -> Result<SunSweepResult, HarnessError> {
    let spec = &config.sweeps.sun;
    let cells = spec.altitude_count * spec.azimuth_count;
    if cells != 333 {
        eprintln!(
            "warning: sun sweep grid has {cells} cells (the published experiment used 333)"
        );
    }
    let digest = config.digest();
    let (_, rail) = rail_for(config, base_seed, DrivingType::Stopping, 0, &digest)?;

    // Otherwise-clear conditions with the black sedan.
    let reference = Environment::preset(WeatherPreset::NoonClear, LeadClass::BlackSedan);
    let overrides = DegradationOverrides {
        base_bias: Some(config.perception_presets.noon_clear.sedan),
        lateral_factor: Some(config.perception_presets.noon_clear.lateral_factor),
        ..Default::default()
    };

    let linspace = |start: f64, stop: f64, count: usize| -> Vec<f64> {
        (0..count)
            .map(|i| {
                if count == 1 {
                    start
                } else {
                    start + (stop - start) * i as f64 / (count - 1) as f64
                }
            })
            .collect()
    };
    let altitudes = linspace(spec.altitude_start, spec.altitude_stop, spec.altitude_count);
    let azimuths = linspace(spec.azimuth_start, spec.azimuth_stop, spec.azimuth_count);
    let mut grid = Vec::with_capacity(cells);
    for &alt in &altitudes {
        for &az in &azimuths {
            grid.push((alt, az));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config {
            message: format!("worker pool: {e}"),
        })?;
    let points: Vec<SunPoint> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &(alt, az))| -> Result<SunPoint, HarnessError> {
                let environment = Environment {
                    preset: WeatherPreset::Custom,
                    sun_altitude: alt,
                    // The grid closes at 360, which aliases 0.
                    sun_azimuth: if az >= 360.0 { az - 360.0 } else { az },
                    ..reference
                };
                let seed = derive_run_seed(base_seed, "sweep/sun", i as u32);
                let run_config =
                    sweep_run_config(config, environment, overrides, seed, rail.clone(), &digest)?;
                let log = run(&run_config)?;
                let dr =
                    mean_detection_ratio(&log, STOPPING_DR_WINDOW).map_err(|source| {
                        HarnessError::Analysis {
                            run_id: format!("sweep/sun/{i}"),
                            source,
                        }
                    })?;
                Ok(SunPoint {
                    altitude: alt,
                    azimuth: az,
                    dr,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Baseline: cells untouched by either cone (high altitude).
    let table = &config.perception_presets;
    let outside: Vec<f64> = points
        .iter()
        .filter(|p| {
            p.altitude >= table.frontal_glare.max_altitude_deg
                && p.altitude >= table.right_rear.max_altitude_deg
        })
        .map(|p| p.dr)
        .collect();
    let baseline_dr = outside.iter().sum::<f64>() / outside.len().max(1) as f64;
    let min_dr = points.iter().map(|p| p.dr).fold(f64::INFINITY, f64::min);
    let max_dr = points.iter().map(|p| p.dr).fold(f64::NEG_INFINITY, f64::max);

    let result = SunSweepResult {
        points,
        baseline_dr,
        min_dr,
        max_dr,
    };

    let dir = out_dir.join("sweeps");
    fs::create_dir_all(&dir).map_err(|e| HarnessError::Io {
        context: format!("creating {}", dir.display()),
        source: e,
    })?;
    let mut csv = String::from("altitude,azimuth,dr\n");
    for p in &result.points {
        csv.push_str(&format!("{:.1},{:.1},{:.9}\n", p.altitude, p.azimuth, p.dr));
    }
    fs::write(dir.join("sun.csv"), csv).map_err(|e| HarnessError::Io {
        context: "writing sweeps/sun.csv".into(),
        source: e,
    })?;
    super::analyze::write_json(out_dir, "sweeps/sun_summary.json", &result)?;
    Ok(result)
}
