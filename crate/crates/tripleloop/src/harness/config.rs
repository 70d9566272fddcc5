//! Configuration schema: one JSON file with sections for the vehicle,
//! controller, plant, perception presets, scenario geometry, the experiment
//! suite, and the MIL sweeps. Unknown keys are rejected everywhere, and load
//! errors name the offending key and line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControllerGains;
use crate::dynamics::PlantParams;
use crate::perception::DegradationTable;
use crate::scenario::{
    build_following_scenario, build_stopping_scenario, Road, ScenarioSpec, Segment,
};
use crate::world::{
    fnv1a64, DrivingType, Environment, LeadClass, Modality, VehicleParams, WeatherPreset,
};

use super::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub controller: ControllerGains,
    pub plant: PlantParams,
    pub perception_presets: DegradationTable,
    pub scenario: ScenarioConfig,
    pub suite: SuiteConfig,
    pub sweeps: SweepsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Lane geometry; the default is a 200 m straight into a 400 m-radius
    /// left arc, 750 m total.
    pub road_segments: Vec<Segment>,
    /// Stopping: lead spawn position along the lane, m.
    pub stopping_lead_spawn: f64,
    /// Following: lead spawn position along the lane at run start, m.
    pub following_lead_spawn: f64,
    /// Following: gap that starts the lead and data collection, m.
    pub following_trigger_distance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            road_segments: vec![
                Segment::Straight { length: 200.0 },
                Segment::Arc {
                    radius: 400.0,
                    angle: 550.0 / 400.0,
                },
            ],
            stopping_lead_spawn: 125.0,
            following_lead_spawn: 30.0,
            following_trigger_distance: 15.0,
        }
    }
}

impl ScenarioConfig {
    pub fn road(&self) -> Result<Road, HarnessError> {
        Road::new(crate::world::Pose::origin(), &self.road_segments).map_err(HarnessError::from)
    }

    pub fn spec(
        &self,
        driving: DrivingType,
        lead_class: LeadClass,
    ) -> Result<ScenarioSpec, HarnessError> {
        let road = self.road()?;
        let mut spec = match driving {
            DrivingType::Stopping => build_stopping_scenario(road, lead_class)?,
            DrivingType::Following => build_following_scenario(road, lead_class)?,
        };
        match driving {
            DrivingType::Stopping => spec.lead_spawn_arclength = self.stopping_lead_spawn,
            DrivingType::Following => {
                spec.lead_spawn_arclength = self.following_lead_spawn;
                spec.follow_trigger_distance = self.following_trigger_distance;
            }
        }
        Ok(spec)
    }
}

/// One experiment condition: a driving type and environment run under one or
/// more modalities.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub driving: DrivingType,
    pub preset: WeatherPreset,
    pub lead: LeadClass,
    pub runs: u32,
    pub modalities: Vec<Modality>,
    /// Required iff preset is `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
}

impl ConditionConfig {
    pub fn environment(&self) -> Environment {
        match (self.preset, self.environment) {
            (WeatherPreset::Custom, Some(env)) => env,
            _ => Environment::preset(self.preset, self.lead),
        }
    }

    /// Environment condition label used for grouping metrics.
    pub fn label(&self) -> String {
        format!("{}/{}", self.preset.label(), self.lead.label())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub base_seed: u64,
    pub conditions: Vec<ConditionConfig>,
}

impl Default for SuiteConfig {
    /// The full experiment matrix: four shared weather presets crossed with
    /// both lead classes (Stopping n = 5, Following n = 3) plus the
    /// ambulance-only noon condition, all under VIL, SIL, and MIL.
    fn default() -> Self {
        let all = vec![Modality::Vil, Modality::Sil, Modality::Mil];
        let presets = [
            WeatherPreset::SunsetClear,
            WeatherPreset::RainFog,
            WeatherPreset::SunGlare,
            WeatherPreset::Night,
        ];
        let mut conditions = Vec::new();
        for driving in [DrivingType::Stopping, DrivingType::Following] {
            let runs = match driving {
                DrivingType::Stopping => 5,
                DrivingType::Following => 3,
            };
            for preset in presets {
                for lead in [LeadClass::BlackSedan, LeadClass::Ambulance] {
                    conditions.push(ConditionConfig {
                        driving,
                        preset,
                        lead,
                        runs,
                        modalities: all.clone(),
                        environment: None,
                    });
                }
            }
        }
        conditions.push(ConditionConfig {
            driving: DrivingType::Stopping,
            preset: WeatherPreset::NoonClear,
            lead: LeadClass::Ambulance,
            runs: 5,
            modalities: all,
            environment: None,
        });
        SuiteConfig {
            name: "default".into(),
            base_seed: 20260810,
            conditions,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogSweepConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Default for FogSweepConfig {
    fn default() -> Self {
        // 95 points at 0.01 steps, one of two grids consistent with the
        // published run count.
        FogSweepConfig {
            start: 0.05,
            stop: 0.99,
            count: 95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SunSweepConfig {
    pub altitude_start: f64,
    pub altitude_stop: f64,
    pub altitude_count: usize,
    pub azimuth_start: f64,
    pub azimuth_stop: f64,
    pub azimuth_count: usize,
}

impl Default for SunSweepConfig {
    fn default() -> Self {
        // 9 x 37 = 333 cells.
        SunSweepConfig {
            altitude_start: 10.0,
            altitude_stop: 90.0,
            altitude_count: 9,
            azimuth_start: 0.0,
            azimuth_stop: 360.0,
            azimuth_count: 37,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepsConfig {
    pub fog: FogSweepConfig,
    pub sun: SunSweepConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            vehicle: VehicleParams::default(),
            controller: ControllerGains::default(),
            plant: PlantParams::default(),
            perception_presets: DegradationTable::default(),
            scenario: ScenarioConfig::default(),
            suite: SuiteConfig::default(),
            sweeps: SweepsConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl Config {
    /// Load and validate a config file; errors name the offending key/line.
    pub fn load(path: &Path) -> Result<Config, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io {
            context: format!("reading config {}", path.display()),
            source: e,
        })?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let config: Config =
            serde_path_to_error::deserialize(&mut de).map_err(|e| HarnessError::Config {
                message: format!("at key `{}`: {}", e.path(), e.inner()),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.vehicle.validate().map_err(|e| HarnessError::Config {
            message: format!("vehicle: {e}"),
        })?;
        let mut seen = std::collections::HashSet::new();
        for c in &self.suite.conditions {
            if c.runs < 1 {
                return Err(HarnessError::Config {
                    message: format!("condition {} has runs = 0", c.label()),
                });
            }
            if c.modalities.is_empty() {
                return Err(HarnessError::Config {
                    message: format!("condition {} lists no modalities", c.label()),
                });
            }
            if c.preset == WeatherPreset::Custom && c.environment.is_none() {
                return Err(HarnessError::Config {
                    message: format!("custom condition {} needs an environment", c.label()),
                });
            }
            if let Some(env) = &c.environment {
                env.validate().map_err(|e| HarnessError::Config {
                    message: format!("condition {}: {e}", c.label()),
                })?;
            }
            for m in &c.modalities {
                if !seen.insert((c.driving, *m, c.label())) {
                    return Err(HarnessError::Config {
                        message: format!(
                            "duplicate condition {} {} {}",
                            c.driving.label(),
                            m.label(),
                            c.label()
                        ),
                    });
                }
            }
        }
        let fog = &self.sweeps.fog;
        if fog.count == 0 || !(0.05..=1.0).contains(&fog.start) || !(0.05..=1.0).contains(&fog.stop)
        {
            return Err(HarnessError::Config {
                message: format!(
                    "fog sweep grid [{}, {}] x {} outside [0.05, 1.00]",
                    fog.start, fog.stop, fog.count
                ),
            });
        }
        let sun = &self.sweeps.sun;
        if sun.altitude_count == 0
            || sun.azimuth_count == 0
            || !(0.0..=90.0).contains(&sun.altitude_start)
            || !(0.0..=90.0).contains(&sun.altitude_stop)
            || !(0.0..=360.0).contains(&sun.azimuth_start)
            || !(0.0..=360.0).contains(&sun.azimuth_stop)
        {
            return Err(HarnessError::Config {
                message: "sun sweep grid outside altitude [0, 90] / azimuth [0, 360]".into(),
            });
        }
        Ok(())
    }

    /// Stable digest over the resolved configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}
