//! Repetition management and persistence.
//!
//! Repetition `i` runs with seed `base_seed + i` and is written to
//! `run_{i:03}.json`. The manifest is written once all repetitions finish.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use safebo::env::TaskSpec;
use safebo::opt::{run_es_after_init, run_random_search, run_safe_bo, Algorithm, OptError, OptProblem, RunRecord};

use crate::config::{ConfigError, ExperimentConfig};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SAFEBO_WORKERS";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid {WORKERS_ENV}: {0}")]
    Workers(String),
}

impl ExperimentError {
    fn io(path: &Path, e: impl ToString) -> Self {
        Self::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}

/// One repetition on disk: the task it ran on and its record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub task: TaskSpec,
    pub record: RunRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NoFeasibleStart,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub index: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub file: Option<String>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    /// 0 on success, 3 if any repetition failed at runtime, 4 if no
    /// repetition had a feasible start.
    pub fn exit_code(&self) -> i32 {
        if self.runs.iter().all(|r| r.status == RunStatus::NoFeasibleStart) {
            4
        } else if self.runs.iter().any(|r| r.status == RunStatus::Failed) {
            3
        } else {
            0
        }
    }
}

pub fn run_file_name(index: usize) -> String {
    format!("run_{index:03}.json")
}

/// Runs repetition `index` without touching the disk.
pub fn run_repetition(cfg: &ExperimentConfig, task: &TaskSpec, index: usize) -> Result<RunRecord, OptError> {
    let seed = cfg.base_seed + index as u64;
    let problem = OptProblem::from_task(task);
    match cfg.algorithm {
        Algorithm::Sb2o => {
            let acq = cfg.acquisition.resolve(task.num_constraints()).map_err(|e| OptError::InvalidArgument(e.to_string()))?;
            run_safe_bo(&problem, cfg.n_init, cfg.budget, &acq, seed)
        }
        Algorithm::Rs => run_random_search(&problem, cfg.n_init, cfg.budget, seed),
        Algorithm::Es => run_es_after_init(&problem, cfg.n_init, cfg.budget, cfg.es_sigma0, seed),
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| ExperimentError::Workers(v.clone()))?;
        if n == 0 {
            return Err(ExperimentError::Workers(v));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| ExperimentError::Workers(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| ExperimentError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Format { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_run(path: &Path) -> Result<RunFile, ExperimentError> {
    read_json(path)
}

/// Every `run_*.json` in `dir`, sorted by file name.
pub fn load_runs(dir: &Path) -> Result<Vec<RunFile>, ExperimentError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ExperimentError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| load_run(p)).collect()
}

/// Executes every repetition and writes the records plus the manifest to
/// `out_dir`. Per-repetition failures are recorded in the manifest rather
/// than returned.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest, ExperimentError> {
    cfg.validate()?;
    let task = cfg.task_spec()?;
    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let pool = worker_pool()?;
    let runs: Vec<ManifestRun> = pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|index| {
                let seed = cfg.base_seed + index as u64;
                let (status, file, message) = match run_repetition(cfg, &task, index) {
                    Ok(record) => {
                        let name = run_file_name(index);
                        let run = RunFile { task: task.clone(), record };
                        match write_json(&out_dir.join(&name), &run) {
                            Ok(()) => (RunStatus::Ok, Some(name), None),
                            Err(e) => (RunStatus::Failed, None, Some(e.to_string())),
                        }
                    }
                    Err(OptError::NoFeasibleStart) => {
                        warn!("repetition {index}: no feasible initial configuration");
                        (RunStatus::NoFeasibleStart, None, Some(OptError::NoFeasibleStart.to_string()))
                    }
                    Err(e) => (RunStatus::Failed, None, Some(e.to_string())),
                };
                info!("repetition {index} (seed {seed}): {status:?}");
                ManifestRun { index, seed, status, file, message }
            })
            .collect()
    });
    let manifest = Manifest { config: cfg.clone(), runs };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
