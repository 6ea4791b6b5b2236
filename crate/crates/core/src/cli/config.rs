use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::MODULE;
use crate::comm::{NetworkConfig, DEFAULT_GATE};
use crate::error::{Error, Result};
use crate::nn::Td3Config;
use crate::vehicle::{ColumnMap, RewardWeights, StopAndGoConfig, VehicleGridConfig, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Vehicle VoI: EVoMI with a confidence interval and per-step IVoMI.
    Case8Voi,
    /// Gated versus always-transmit CAMs over the coupled simulator.
    Case11Comm,
    /// Exact property suites on random tabular instances.
    TabularProperties,
    /// The vehicle VoI pipeline on a recorded trajectory.
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Case8Voi => "case8_voi",
            Scenario::Case11Comm => "case11_comm",
            Scenario::TabularProperties => "tabular_properties",
            Scenario::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "case8_voi" => Ok(Scenario::Case8Voi),
            "case11_comm" => Ok(Scenario::Case11Comm),
            "tabular_properties" => Ok(Scenario::TabularProperties),
            "custom" => Ok(Scenario::Custom),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?}; expected case8_voi, case11_comm, tabular_properties or custom"
            ))),
        }
    }
}

/// Source of the superior control policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Value iteration on the discretised follower.
    #[default]
    Dp,
    /// TD3 trained on fresh stop-and-go traces; IVoI from its critics.
    Td3,
}

/// Every module configuration a scenario may read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModuleConfigs {
    pub vehicle: VehicleParams,
    pub reward: RewardWeights,
    pub grid: VehicleGridConfig,
    pub trajectory: StopAndGoConfig,
    pub network: NetworkConfig,
    /// Control intervals per episode.
    pub horizon: usize,
    /// Value in the predecessor slot when the information is missing.
    pub dummy_value: f64,
    /// Threshold of the gated communication policy.
    pub gate: f64,
    pub controller: Controller,
    pub td3: Td3Config,
    /// Recorded trajectory for the custom scenario.
    pub trajectory_path: Option<PathBuf>,
    pub trajectory_columns: ColumnMap,
    /// Random instances per tabular property suite.
    pub tabular_instances: usize,
    /// Cases of the queue and delay fuzzing suite.
    pub fuzz_cases: usize,
}

impl Default for ModuleConfigs {
    fn default() -> Self {
        ModuleConfigs {
            vehicle: VehicleParams::default(),
            reward: RewardWeights::default(),
            grid: VehicleGridConfig::default(),
            trajectory: StopAndGoConfig::default(),
            network: NetworkConfig::default(),
            horizon: 500,
            dummy_value: 0.0,
            gate: DEFAULT_GATE,
            controller: Controller::Dp,
            td3: Td3Config::default(),
            trajectory_path: None,
            trajectory_columns: ColumnMap::default(),
            tabular_instances: 100,
            fuzz_cases: 100_000,
        }
    }
}

/// A run description as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: i64,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Dotted paths into [`ModuleConfigs`], e.g. `network.t_slots = 10`.
    #[serde(default)]
    pub overrides: BTreeMap<String, toml::Value>,
}

fn default_episodes() -> usize {
    200
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            seed: 0,
            episodes: default_episodes(),
            out_dir: default_out_dir(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        u64::try_from(self.seed).map_err(|_| Error::Config(format!("seed must be non-negative, got {}", self.seed)))
    }

    /// Adds or replaces an override from `key=value` text.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = parse_override(assignment)?;
        self.overrides.insert(k, v);
        Ok(())
    }

    /// Module configurations with every override applied.
    pub fn modules(&self) -> Result<ModuleConfigs> {
        let mut root = toml::Value::try_from(ModuleConfigs::default()).map_err(|e| Error::Config(e.to_string()))?;
        for (path, value) in &self.overrides {
            set_path(&mut root, path, value.clone())?;
        }
        root.try_into::<ModuleConfigs>().map_err(|e| Error::Config(e.to_string()))
    }

    /// Schema and cross-field checks without running anything.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if let Err(e) = self.seed() {
            violations.push(e.to_string());
        }
        if self.episodes == 0 {
            violations.push("episodes must be >= 1".into());
        }
        if matches!(self.scenario, Scenario::Case8Voi | Scenario::Custom) && self.episodes < 2 {
            violations.push("EVoI confidence intervals need episodes >= 2".into());
        }
        match self.modules() {
            Err(e) => violations.push(e.to_string()),
            Ok(m) => {
                let mut check = |r: Result<()>| {
                    if let Err(e) = r {
                        violations.push(e.to_string());
                    }
                };
                check(m.vehicle.validate());
                check(m.reward.validate());
                check(m.trajectory.validate());
                check(m.network.validate());
                check(m.td3.validate());
                if (m.network.control_t - m.vehicle.t).abs() > 1e-12 {
                    violations.push(format!(
                        "network.control_t = {} differs from the vehicle control interval vehicle.t = {}",
                        m.network.control_t, m.vehicle.t
                    ));
                }
                if (m.trajectory.dt - m.vehicle.t).abs() > 1e-12 {
                    violations.push("trajectory.dt must equal the vehicle control interval".into());
                }
                if m.horizon == 0 {
                    violations.push("horizon must be >= 1".into());
                }
                if self.scenario != Scenario::Custom && m.trajectory.duration < m.horizon + 1 {
                    violations.push(format!(
                        "trajectory.duration = {} is shorter than horizon + 1 = {}",
                        m.trajectory.duration,
                        m.horizon + 1
                    ));
                }
                if self.scenario == Scenario::Custom && m.trajectory_path.is_none() {
                    violations.push("the custom scenario needs trajectory_path".into());
                }
                if m.grid.levels.len() != m.grid.level_weights.len() {
                    violations.push("grid.levels and grid.level_weights differ in length".into());
                }
                if m.tabular_instances == 0 || m.fuzz_cases == 0 {
                    violations.push("tabular_instances and fuzz_cases must be >= 1".into());
                }
            }
        }
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Splits `key=value`; the value is read as a TOML value and falls back to
/// a bare string.
pub fn parse_override(assignment: &str) -> Result<(String, toml::Value)> {
    let (k, v) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("override {assignment:?} has an empty key")));
    }
    let v = v.trim();
    let value = toml::from_str::<BTreeMap<String, toml::Value>>(&format!("v = {v}"))
        .ok()
        .and_then(|mut m| m.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {path:?}: {} is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            // Integers given for float fields stay valid.
            let value = match (table.get(*part), value) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(n)) => toml::Value::Float(n as f64),
                (_, v) => v,
            };
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(Error::Config(format!("override {path:?} is empty")))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::new(Scenario::Case8Voi)
    }
}

pub(crate) fn module_error(msg: impl Into<String>) -> Error {
    Error::invalid(MODULE, msg)
}
