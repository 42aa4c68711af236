//! Experiment configuration files.
//!
//! A config is a strict JSON object. Only `task` and `algorithm` are required:
//!
//! ```json
//! { "task": "cart_pole_swing_up", "algorithm": "sb2o", "task_params": { "horizon": 25.0 } }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use safebo::acq::{AcquisitionConfig, BoundMode};
use safebo::env::TaskSpec;
use safebo::opt::Algorithm;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    Missing(PathBuf),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

impl ConfigError {
    /// Short tag naming the failure class.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Missing(_) => "missing",
            Self::Io { .. } => "io",
            Self::Parse(_) => "parse",
            Self::Schema(_) => "schema",
        }
    }
}

/// Acquisition settings. `beta_constraints` defaults to 3 for every
/// constraint of the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSettings {
    pub beta_objective: f64,
    pub beta_constraints: Option<Vec<f64>>,
    pub barrier_weight: f64,
    pub bound_mode: BoundMode,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        let d = AcquisitionConfig::with_defaults(0);
        Self {
            beta_objective: d.beta_objective,
            beta_constraints: None,
            barrier_weight: d.barrier_weight,
            bound_mode: d.bound_mode,
        }
    }
}

impl AcquisitionSettings {
    pub fn resolve(&self, q: usize) -> Result<AcquisitionConfig, ConfigError> {
        let betas = match &self.beta_constraints {
            Some(b) if b.len() == q => b.clone(),
            Some(b) => {
                return Err(ConfigError::Schema(format!("beta_constraints has {} entries, task has {q} constraints", b.len())))
            }
            None => AcquisitionConfig::with_defaults(q).beta_constraints,
        };
        let cfg = AcquisitionConfig {
            beta_objective: self.beta_objective,
            beta_constraints: betas,
            barrier_weight: self.barrier_weight,
            bound_mode: self.bound_mode,
        };
        cfg.validate().map_err(|e| ConfigError::Schema(e.to_string()))?;
        Ok(cfg)
    }
}

fn default_n_init() -> usize {
    50
}
fn default_budget() -> usize {
    100
}
fn default_repeats() -> usize {
    20
}
fn default_sigma0() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: String,
    /// Field overrides applied to the task's default parameters.
    #[serde(default)]
    pub task_params: Map<String, Value>,
    pub algorithm: Algorithm,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub acquisition: AcquisitionSettings,
    /// Initial step of the evolution strategy in normalized coordinates.
    #[serde(default = "default_sigma0")]
    pub es_sigma0: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal config with every default filled in.
    pub fn new(task: &str, algorithm: Algorithm) -> Self {
        Self {
            task: task.to_string(),
            task_params: Map::new(),
            algorithm,
            n_init: default_n_init(),
            budget: default_budget(),
            repeats: default_repeats(),
            base_seed: 0,
            acquisition: AcquisitionSettings::default(),
            es_sigma0: default_sigma0(),
            out_dir: None,
        }
    }

    /// Task defaults with `task_params` applied. Unknown parameter names are
    /// rejected.
    pub fn task_spec(&self) -> Result<TaskSpec, ConfigError> {
        if TaskSpec::from_id(&self.task).is_none() {
            return Err(ConfigError::Schema(format!("unknown task `{}`", self.task)));
        }
        if self.task_params.contains_key("task") {
            return Err(ConfigError::Schema("task_params may not set `task`".into()));
        }
        let mut obj = self.task_params.clone();
        obj.insert("task".into(), Value::String(self.task.clone()));
        let spec: TaskSpec = serde_json::from_value(Value::Object(obj))
            .map_err(|e| ConfigError::Schema(format!("task_params: {e}")))?;
        spec.validate().map_err(|e| ConfigError::Schema(e.to_string()))?;
        Ok(spec)
    }

    pub fn acquisition_config(&self) -> Result<AcquisitionConfig, ConfigError> {
        self.acquisition.resolve(self.task_spec()?.num_constraints())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.repeats < 1 {
            return Err(ConfigError::Schema("repeats must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Sb2o && self.n_init < 2 {
            return Err(ConfigError::Schema("sb2o needs n_init >= 2".into()));
        }
        if self.algorithm == Algorithm::Es && !(self.es_sigma0 > 0.0 && self.es_sigma0.is_finite()) {
            return Err(ConfigError::Schema(format!("es_sigma0 {}", self.es_sigma0)));
        }
        self.acquisition_config()?;
        Ok(())
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ConfigError::Schema(e.to_string()),
        _ => ConfigError::Parse(e.to_string()),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ConfigError::Missing(path.to_path_buf()),
        _ => ConfigError::Io { path: path.to_path_buf(), message: e.to_string() },
    })?;
    parse_config_str(&text)
}
