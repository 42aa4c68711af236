//! Outer optimization loops: safe Bayesian optimization with the barrier
//! acquisition, Latin-hypercube random search and a (1+1) evolution
//! strategy baseline.
//!
//! All surrogates and search moves live in the normalized unit cube of the
//! [`SearchSpace`]. Each run draws every random number from one ChaCha
//! stream seeded by the run seed.

mod space;

pub use space::{lhs_init, lhs_unit, Dimension, ParamCategory, SearchSpace};

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acq::{self, AcqError, AcquisitionConfig};
use crate::env::{EnvError, EvalOutcome, TaskSpec};
use crate::gp::{self, Dataset, FitOptions, GpError, GpPosterior, HyperparamBounds, KernelHyperparams};
use crate::optim::{minimize_in_box, DescentOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no feasible configuration to start from")]
    NoFeasibleStart,
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Acq(#[from] AcqError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Black-box map from a raw configuration to objective and constraints.
/// Must be deterministic in `(z, seed)`.
pub trait Evaluator: Sync {
    fn evaluate(&self, z: &[f64], seed: u64) -> Result<EvalOutcome, EnvError>;
}

impl Evaluator for TaskSpec {
    fn evaluate(&self, z: &[f64], seed: u64) -> Result<EvalOutcome, EnvError> {
        TaskSpec::evaluate(self, z, seed)
    }
}

/// Adapts a closure returning `(r, g)`.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    fn evaluate(&self, z: &[f64], _seed: u64) -> Result<EvalOutcome, EnvError> {
        let (r, g) = (self.0)(z);
        Ok(EvalOutcome::new(r, g))
    }
}

pub struct OptProblem<'a> {
    evaluator: &'a dyn Evaluator,
    space: SearchSpace,
    q: usize,
    label: String,
}

impl<'a> OptProblem<'a> {
    pub fn new(evaluator: &'a dyn Evaluator, space: SearchSpace, q: usize, label: &str) -> Self {
        Self { evaluator, space, q, label: label.to_string() }
    }

    pub fn from_task(task: &'a TaskSpec) -> Self {
        Self::new(task, task.search_space(), task.num_constraints(), task.id())
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn num_constraints(&self) -> usize {
        self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Suggest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sb2o,
    Rs,
    Es,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sb2o => "sb2o",
            Self::Rs => "rs",
            Self::Es => "es",
        }
    }
}

/// Acquisition details of a suggested point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionInfo {
    /// `None` when the acquisition was infinite (fallback suggestions).
    pub acquisition: Option<f64>,
    pub fallback: bool,
    pub pessimistic_bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub z_raw: Vec<f64>,
    pub z_normalized: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub feasible: bool,
    pub phase: Phase,
    /// Seconds spent evaluating this entry.
    pub wall_time: f64,
    pub trace_id: String,
    pub suggestion: Option<SuggestionInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub task: String,
    pub entries: Vec<RunEntry>,
    /// Cumulative minimum of feasible objectives, `None` before the first.
    pub best_feasible: Vec<Option<f64>>,
}

impl RunRecord {
    fn new(algorithm: Algorithm, seed: u64, task: &str) -> Self {
        Self { algorithm, seed, task: task.to_string(), entries: Vec::new(), best_feasible: Vec::new() }
    }

    fn push(&mut self, entry: RunEntry) {
        let prev = self.best_feasible.last().copied().flatten();
        let next = match (prev, entry.feasible) {
            (Some(b), true) => Some(b.min(entry.objective)),
            (None, true) => Some(entry.objective),
            (p, false) => p,
        };
        self.entries.push(entry);
        self.best_feasible.push(next);
    }

    pub fn final_best(&self) -> Option<f64> {
        self.best_feasible.last().copied().flatten()
    }

    /// Feasible entry with the least objective, first one on ties.
    pub fn best_entry(&self) -> Option<&RunEntry> {
        self.entries
            .iter()
            .filter(|e| e.feasible)
            .fold(None, |best: Option<&RunEntry>, e| match best {
                Some(b) if b.objective <= e.objective => Some(b),
                _ => Some(e),
            })
    }

    /// Copy with every wall time zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.entries.iter_mut().for_each(|e| e.wall_time = 0.0);
        r
    }
}

fn evaluate_entry(
    problem: &OptProblem,
    record: &mut RunRecord,
    z_raw: Vec<f64>,
    phase: Phase,
    suggestion: Option<SuggestionInfo>,
) -> Result<(), OptError> {
    let z_normalized = problem.space.normalize(&z_raw)?;
    let start = Instant::now();
    let out = problem.evaluator.evaluate(&z_raw, record.seed)?;
    if out.constraints.len() != problem.q {
        return Err(OptError::InvalidArgument(format!(
            "evaluator returned {} constraints, expected {}",
            out.constraints.len(),
            problem.q
        )));
    }
    let index = record.entries.len();
    record.push(RunEntry {
        z_raw,
        z_normalized,
        objective: out.objective,
        constraints: out.constraints,
        feasible: out.feasible,
        phase,
        wall_time: start.elapsed().as_secs_f64(),
        trace_id: format!("{}:{}", record.seed, index),
        suggestion,
    });
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseFilter {
    All,
    Init,
    Suggest,
}

pub fn feasibility_rate(record: &RunRecord, filter: PhaseFilter) -> Result<f64, OptError> {
    let selected: Vec<&RunEntry> = record
        .entries
        .iter()
        .filter(|e| match filter {
            PhaseFilter::All => true,
            PhaseFilter::Init => e.phase == Phase::Init,
            PhaseFilter::Suggest => e.phase == Phase::Suggest,
        })
        .collect();
    if selected.is_empty() {
        return Err(OptError::InvalidArgument("no entries match the phase filter".into()));
    }
    Ok(selected.iter().filter(|e| e.feasible).count() as f64 / selected.len() as f64)
}

/// Tunables of the acquisition search.
#[derive(Debug, Clone, PartialEq)]
pub struct SuggestOptions {
    /// Total local descents per round.
    pub restarts: usize,
    /// Evaluated feasible points used as starts, best first.
    pub max_feasible_starts: usize,
    /// Random candidates screened for finite acquisition.
    pub candidates: usize,
    pub descent: DescentOptions,
    pub gp_max_iters: usize,
    pub gp_restarts: usize,
    pub gp_bounds: HyperparamBounds,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_feasible_starts: 10,
            candidates: 200,
            descent: DescentOptions { max_iters: 200, grad_tol: 1e-6, initial_step: 0.05, armijo: 1e-4 },
            gp_max_iters: 60,
            gp_restarts: 3,
            gp_bounds: HyperparamBounds::default(),
        }
    }
}

/// Surrogates for the objective and every constraint.
#[derive(Debug, Clone)]
pub struct Surrogates {
    pub objective: GpPosterior,
    pub constraints: Vec<GpPosterior>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub z_raw: Vec<f64>,
    pub z_normalized: Vec<f64>,
    pub acquisition: f64,
    pub fallback: bool,
    pub pessimistic_bounds: Vec<f64>,
}

/// Fits one GP per observed quantity on the history's normalized inputs.
/// `warm` carries hyperparameters between rounds.
pub fn fit_surrogates<R: Rng + ?Sized>(
    history: &RunRecord,
    q: usize,
    options: &SuggestOptions,
    warm: &mut Option<Vec<KernelHyperparams>>,
    rng: &mut R,
) -> Result<Surrogates, OptError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); q + 1];
    for e in &history.entries {
        let z: Vec<f64> = e.z_normalized.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let duplicate = rows.iter().any(|r| r.iter().zip(&z).all(|(a, b)| (a - b).abs() <= 1e-12));
        if duplicate {
            continue;
        }
        rows.push(z);
        values[0].push(e.objective);
        for (i, g) in e.constraints.iter().enumerate() {
            values[i + 1].push(*g);
        }
    }
    let mut posts = Vec::with_capacity(q + 1);
    let mut next_warm = Vec::with_capacity(q + 1);
    for (i, targets) in values.iter().enumerate() {
        let data = Dataset::from_rows(&rows, targets)?;
        let warm_start = warm.as_ref().and_then(|w| w.get(i).cloned());
        let restarts = if warm_start.is_some() { options.gp_restarts.min(2) } else { options.gp_restarts };
        let fit = FitOptions {
            restarts: restarts.max(1),
            seed: rng.gen(),
            warm_start,
            max_iters: options.gp_max_iters,
            bounds: options.gp_bounds.clone(),
        };
        let post = gp::fit_with(&data, &fit)?;
        next_warm.push(post.hyperparams().clone());
        posts.push(post);
    }
    *warm = Some(next_warm);
    let objective = posts.remove(0);
    Ok(Surrogates { objective, constraints: posts })
}

/// Minimizes the barrier acquisition over the unit cube from feasible
/// evaluated points and screened random candidates.
pub fn optimize_acquisition<R: Rng + ?Sized>(
    surrogates: &Surrogates,
    history: &RunRecord,
    cfg: &AcquisitionConfig,
    options: &SuggestOptions,
    rng: &mut R,
) -> Result<(Vec<f64>, f64), OptError> {
    let p = surrogates.objective.dim();
    let acq_at = |z: &[f64]| acq::sb2o(&surrogates.objective, &surrogates.constraints, z, cfg);

    let mut feasible: Vec<&RunEntry> = history.entries.iter().filter(|e| e.feasible).collect();
    feasible.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    let mut starts: Vec<Vec<f64>> = feasible
        .iter()
        .take(options.max_feasible_starts.min(options.restarts))
        .map(|e| e.z_normalized.iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();

    let mut screened: Vec<(f64, Vec<f64>)> = Vec::with_capacity(options.candidates);
    for _ in 0..options.candidates {
        let z: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let v = acq_at(&z)?;
        if v.is_finite() {
            screened.push((v, z));
        }
    }
    screened.sort_by(|a, b| a.0.total_cmp(&b.0));
    let room = options.restarts.saturating_sub(starts.len());
    starts.extend(screened.into_iter().take(room).map(|(_, z)| z));

    let lower = vec![0.0; p];
    let upper = vec![1.0; p];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let result = minimize_in_box(
            |z| match acq::sb2o_with_gradient(&surrogates.objective, &surrogates.constraints, z, cfg) {
                Ok((v, Some(g))) => (v, Some(g.iter().copied().collect())),
                _ => (f64::INFINITY, None),
            },
            start,
            &lower,
            &upper,
            &options.descent,
        );
        if result.value.is_finite() && best.as_ref().map_or(true, |(v, _)| result.value < *v) {
            best = Some((result.value, result.x));
        }
    }
    Ok(match best {
        Some((v, z)) => (z, v),
        None => (Vec::new(), f64::INFINITY),
    })
}

fn pessimistic_bounds(surrogates: &Surrogates, z: &[f64], cfg: &AcquisitionConfig) -> Result<Vec<f64>, OptError> {
    surrogates
        .constraints
        .iter()
        .zip(&cfg.beta_constraints)
        .map(|(post, &beta)| Ok(acq::pessimistic_bound(post, z, beta, cfg.bound_mode)?))
        .collect()
}

/// Moves `z` off existing rows by a tiny inward perturbation.
fn separate_from_history<R: Rng + ?Sized>(z: &mut [f64], history: &RunRecord, rng: &mut R) {
    for _ in 0..100 {
        let clash = history
            .entries
            .iter()
            .any(|e| e.z_normalized.iter().zip(z.iter()).all(|(a, b)| (a - b).abs() <= 1e-9));
        if !clash {
            return;
        }
        for v in z.iter_mut() {
            let delta: f64 = rng.gen_range(-1e-6..=1e-6);
            *v = (*v + delta).clamp(0.0, 1.0);
        }
    }
}

/// One round of the barrier acquisition.
pub fn suggest<R: Rng + ?Sized>(
    history: &RunRecord,
    space: &SearchSpace,
    cfg: &AcquisitionConfig,
    options: &SuggestOptions,
    warm: &mut Option<Vec<KernelHyperparams>>,
    rng: &mut R,
) -> Result<(Suggestion, Surrogates), OptError> {
    cfg.validate()?;
    let q = cfg.num_constraints();
    if history.entries.iter().all(|e| !e.feasible) {
        return Err(OptError::NoFeasibleStart);
    }
    let surrogates = fit_surrogates(history, q, options, warm, rng)?;
    let (mut z, value) = optimize_acquisition(&surrogates, history, cfg, options, rng)?;
    let fallback = !value.is_finite();
    if fallback {
        let best = history.best_entry().ok_or(OptError::NoFeasibleStart)?;
        warn!("every acquisition start is infinite; falling back to the best feasible point");
        z = best.z_normalized.clone();
    }
    separate_from_history(&mut z, history, rng);
    let z_raw = space.denormalize(&z)?;
    let z_normalized = space.normalize(&z_raw)?;
    let bounds = pessimistic_bounds(&surrogates, &z_normalized, cfg)?;
    let acquisition = acq::sb2o(&surrogates.objective, &surrogates.constraints, &z_normalized, cfg)?;
    Ok((Suggestion { z_raw, z_normalized, acquisition, fallback, pessimistic_bounds: bounds }, surrogates))
}

fn check_constraint_count(problem: &OptProblem, cfg: &AcquisitionConfig) -> Result<(), OptError> {
    if cfg.num_constraints() != problem.q {
        return Err(OptError::InvalidArgument(format!(
            "acquisition has {} constraint betas but the problem has {} constraints",
            cfg.num_constraints(),
            problem.q
        )));
    }
    Ok(())
}

fn run_init(problem: &OptProblem, record: &mut RunRecord, n_init: usize, rng: &mut ChaCha8Rng) -> Result<(), OptError> {
    for z in lhs_init(&problem.space, n_init, rng)? {
        evaluate_entry(problem, record, z, Phase::Init, None)?;
    }
    Ok(())
}

pub fn run_safe_bo(
    problem: &OptProblem,
    n_init: usize,
    budget: usize,
    cfg: &AcquisitionConfig,
    seed: u64,
) -> Result<RunRecord, OptError> {
    run_safe_bo_with(problem, n_init, budget, cfg, &SuggestOptions::default(), seed)
}

pub fn run_safe_bo_with(
    problem: &OptProblem,
    n_init: usize,
    budget: usize,
    cfg: &AcquisitionConfig,
    options: &SuggestOptions,
    seed: u64,
) -> Result<RunRecord, OptError> {
    cfg.validate()?;
    check_constraint_count(problem, cfg)?;
    if n_init < 2 {
        return Err(OptError::InvalidArgument("surrogate fitting needs n_init >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = RunRecord::new(Algorithm::Sb2o, seed, &problem.label);
    run_init(problem, &mut record, n_init, &mut rng)?;
    if budget > 0 && record.final_best().is_none() {
        return Err(OptError::NoFeasibleStart);
    }
    let mut warm = None;
    for round in 0..budget {
        let (s, _) = suggest(&record, &problem.space, cfg, options, &mut warm, &mut rng)?;
        debug!("round {round}: acquisition {:.4e} at {:?}", s.acquisition, s.z_raw);
        let info = SuggestionInfo {
            acquisition: s.acquisition.is_finite().then_some(s.acquisition),
            fallback: s.fallback,
            pessimistic_bounds: s.pessimistic_bounds,
        };
        evaluate_entry(problem, &mut record, s.z_raw, Phase::Suggest, Some(info))?;
    }
    Ok(record)
}

/// Evaluates the same initial design as [`run_safe_bo`] followed by a second
/// Latin hypercube of `budget` points.
pub fn run_random_search(problem: &OptProblem, n_init: usize, budget: usize, seed: u64) -> Result<RunRecord, OptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = RunRecord::new(Algorithm::Rs, seed, &problem.label);
    if n_init > 0 {
        run_init(problem, &mut record, n_init, &mut rng)?;
    }
    if budget > 0 {
        for z in lhs_init(&problem.space, budget, &mut rng)? {
            evaluate_entry(problem, &mut record, z, Phase::Suggest, None)?;
        }
    }
    Ok(record)
}

const ES_GROWTH: f64 = 1.5;
const ES_MIN_SIGMA: f64 = 1e-6;

fn es_loop(
    problem: &OptProblem,
    record: &mut RunRecord,
    mut parent: Vec<f64>,
    mut parent_value: f64,
    sigma0: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(), OptError> {
    let p = problem.space.dim();
    let mut sigma = sigma0;
    let shrink = ES_GROWTH.powf(-0.25);
    for _ in 0..budget {
        let child: Vec<f64> = (0..p)
            .map(|j| {
                let step: f64 = rng.sample(StandardNormal);
                (parent[j] + sigma * step).clamp(0.0, 1.0)
            })
            .collect();
        let z_raw = problem.space.denormalize(&child)?;
        evaluate_entry(problem, record, z_raw, Phase::Suggest, None)?;
        let last = record.entries.last().expect("just pushed");
        if last.feasible && last.objective <= parent_value {
            parent = last.z_normalized.clone();
            parent_value = last.objective;
            sigma *= ES_GROWTH;
        } else {
            sigma *= shrink;
        }
        sigma = sigma.max(ES_MIN_SIGMA);
    }
    Ok(())
}

/// (1+1)-ES with the one-fifth success rule in normalized coordinates,
/// starting from `start` (raw), which is evaluated first.
pub fn run_one_plus_one_es(
    problem: &OptProblem,
    start: &[f64],
    sigma0: f64,
    budget: usize,
    seed: u64,
) -> Result<RunRecord, OptError> {
    if !(sigma0 > 0.0) {
        return Err(OptError::InvalidArgument(format!("sigma0 {sigma0}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = RunRecord::new(Algorithm::Es, seed, &problem.label);
    evaluate_entry(problem, &mut record, problem.space.project(start)?, Phase::Init, None)?;
    let first = &record.entries[0];
    if !first.feasible {
        return Err(OptError::NoFeasibleStart);
    }
    let (parent, value) = (first.z_normalized.clone(), first.objective);
    es_loop(problem, &mut record, parent, value, sigma0, budget, &mut rng)?;
    Ok(record)
}

/// Latin hypercube initialization followed by the ES from the best feasible
/// initial point.
pub fn run_es_after_init(
    problem: &OptProblem,
    n_init: usize,
    budget: usize,
    sigma0: f64,
    seed: u64,
) -> Result<RunRecord, OptError> {
    if !(sigma0 > 0.0) {
        return Err(OptError::InvalidArgument(format!("sigma0 {sigma0}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = RunRecord::new(Algorithm::Es, seed, &problem.label);
    run_init(problem, &mut record, n_init.max(1), &mut rng)?;
    let best = record.best_entry().ok_or(OptError::NoFeasibleStart)?;
    let (parent, value) = (best.z_normalized.clone(), best.objective);
    es_loop(problem, &mut record, parent, value, sigma0, budget, &mut rng)?;
    Ok(record)
}

/// Surrogate state at a given history, for inspection and tests.
pub fn surrogate_snapshot(history: &RunRecord, q: usize, seed: u64) -> Result<Surrogates, OptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fit_surrogates(history, q, &SuggestOptions::default(), &mut None, &mut rng)
}

/// Dense matrix of normalized inputs in entry order.
pub fn normalized_inputs(record: &RunRecord) -> DMatrix<f64> {
    let p = record.entries.first().map_or(0, |e| e.z_normalized.len());
    DMatrix::from_fn(record.entries.len(), p, |i, j| record.entries[i].z_normalized[j])
}

/// Objective values in entry order.
pub fn objectives(record: &RunRecord) -> DVector<f64> {
    DVector::from_iterator(record.entries.len(), record.entries.iter().map(|e| e.objective))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_space(p: usize) -> SearchSpace {
        SearchSpace::new((0..p).map(|i| Dimension::new(&format!("z{i}"), 0.0, 1.0, false, ParamCategory::Control)).collect())
            .unwrap()
    }

    #[test]
    fn feasibility_rate_counts() {
        let mut rec = RunRecord::new(Algorithm::Rs, 0, "t");
        for (i, f) in [true, true, true, false].iter().enumerate() {
            rec.push(RunEntry {
                z_raw: vec![i as f64],
                z_normalized: vec![i as f64],
                objective: 1.0,
                constraints: vec![],
                feasible: *f,
                phase: Phase::Suggest,
                wall_time: 0.0,
                trace_id: String::new(),
                suggestion: None,
            });
        }
        assert_eq!(feasibility_rate(&rec, PhaseFilter::All).unwrap(), 0.75);
        assert!(feasibility_rate(&rec, PhaseFilter::Init).is_err());
    }

    #[test]
    fn random_search_accounting_and_determinism() {
        let ev = FnEvaluator(|z: &[f64]| (z[0] * z[0], vec![z[0] - 0.5]));
        let problem = OptProblem::new(&ev, unit_space(1), 1, "toy");
        let a = run_random_search(&problem, 3, 7, 42).unwrap();
        let b = run_random_search(&problem, 3, 7, 42).unwrap();
        assert_eq!(a.entries.len(), 10);
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn best_feasible_is_nonincreasing() {
        let ev = FnEvaluator(|z: &[f64]| ((z[0] - 0.3).powi(2), vec![0.2 - z[0]]));
        let problem = OptProblem::new(&ev, unit_space(1), 1, "toy");
        let rec = run_random_search(&problem, 5, 20, 1).unwrap();
        let vals: Vec<f64> = rec.best_feasible.iter().flatten().copied().collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn es_never_accepts_infeasible_offspring() {
        let ev = FnEvaluator(|z: &[f64]| (z[0], vec![if z[0] == 0.5 { -1.0 } else { 1.0 }]));
        let problem = OptProblem::new(&ev, unit_space(1), 1, "toy");
        let rec = run_one_plus_one_es(&problem, &[0.5], 0.3, 20, 3).unwrap();
        assert!(rec.best_feasible.iter().all(|b| *b == Some(0.5)));
    }

    #[test]
    fn sb2o_requires_a_feasible_start() {
        let ev = FnEvaluator(|z: &[f64]| (z[0], vec![1.0]));
        let problem = OptProblem::new(&ev, unit_space(1), 1, "toy");
        let cfg = AcquisitionConfig::with_defaults(1);
        assert_eq!(run_safe_bo(&problem, 4, 2, &cfg, 0), Err(OptError::NoFeasibleStart));
        let rec = run_safe_bo(&problem, 4, 0, &cfg, 0).unwrap();
        assert_eq!(rec.entries.len(), 4);
    }
}
