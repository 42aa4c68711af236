//! Benchmark control tasks and episode simulation.
//!
//! Every task integrates its closed loop with classic RK4 at a fixed inner
//! step and holds the control input constant between filter updates. An
//! episode ends when the state settles at the target, at the horizon, when
//! the safety filter becomes infeasible, or when the state blows up.

mod acc;
mod cart_pole;
mod double_integrator;
mod point_mass;

pub use acc::{acc_dynamics, AccPlant, AccTask};
pub use cart_pole::CartPoleSwingUp;
pub use double_integrator::DoubleIntegratorLqr;
pub use point_mass::PointMassTracking;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctrl::{wrap_angle, ControlAffine, CtrlError};
use crate::opt::SearchSpace;
use crate::qp::QpStatus;

/// Constraint values at or below this count as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// States whose magnitude exceeds this are treated as a blow-up.
const STATE_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("controller setup failed: {0}")]
    Control(#[from] CtrlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Settled,
    Timeout,
    QpInfeasible,
    StateViolation,
}

/// Filter status attached to each sample: the status of the solve that
/// produced the input held at that time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Optimal,
    Infeasible,
    None,
}

impl SampleStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(Self::Optimal),
            "infeasible" => Some(Self::Infeasible),
            "none" => Some(Self::None),
            _ => None,
        }
    }
}

impl From<QpStatus> for SampleStatus {
    fn from(s: QpStatus) -> Self {
        match s {
            QpStatus::Optimal => Self::Optimal,
            QpStatus::Infeasible => Self::Infeasible,
        }
    }
}

/// Sampled closed-loop trajectory with the metadata needed to score it.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub barriers: Vec<Vec<f64>>,
    pub qp_status: Vec<SampleStatus>,
    /// Phase-1 margin of the filter rows that produced the held input.
    pub qp_margin: Vec<f64>,
    /// Input the cost is measured against, per sample. Zero when absent.
    pub input_reference: Option<Vec<Vec<f64>>>,
    pub termination: TerminationReason,
    pub horizon: f64,
    pub target: Vec<f64>,
    /// Components compared modulo `2 pi`.
    pub angle_wrap: Vec<bool>,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub barrier_names: Vec<String>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Deviation of sample `k` from `target`, wrapping angle components.
    pub fn deviation(&self, k: usize, target: &[f64]) -> Vec<f64> {
        self.states[k]
            .iter()
            .zip(target)
            .zip(&self.angle_wrap)
            .map(|((x, t), &wrap)| if wrap { wrap_angle(x - t) } else { x - t })
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        std::iter::once("t".to_string())
            .chain(self.state_names.iter().cloned())
            .chain(self.input_names.iter().cloned())
            .chain(self.barrier_names.iter().cloned())
            .chain(std::iter::once("qp_status".to_string()))
            .collect()
    }

    pub fn worst_barrier(&self) -> Option<f64> {
        self.barriers.iter().flatten().copied().reduce(f64::min)
    }
}

/// Trapezoidal integral of `e'Qe + w'Rw` where `e` is the deviation from the
/// trace target and `w` the deviation from the input reference. The input
/// recorded at a sample is the one held over the following step, so each
/// step uses that input at both of its ends.
pub fn lqr_cost(trace: &EpisodeTrace, q: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let state = |k: usize| {
        let e = DVector::from_vec(trace.deviation(k, &trace.target));
        (e.transpose() * q * &e)[0]
    };
    let input = |held: usize, k: usize| {
        let mut w = DVector::from_column_slice(&trace.inputs[held]);
        if let Some(reference) = &trace.input_reference {
            w -= DVector::from_column_slice(&reference[k]);
        }
        (w.transpose() * r * &w)[0]
    };
    (1..trace.len())
        .map(|k| {
            let h = trace.times[k] - trace.times[k - 1];
            0.5 * h * (state(k - 1) + state(k) + input(k - 1, k - 1) + input(k - 1, k))
        })
        .sum()
}

/// Elapsed time until the state first comes within `tol` of `target`, or
/// `horizon + 1` if it never does.
pub fn response_time(trace: &EpisodeTrace, target: &[f64], tol: f64) -> f64 {
    let t0 = trace.times.first().copied().unwrap_or(0.0);
    (0..trace.len())
        .find(|&k| trace.deviation(k, target).iter().map(|d| d * d).sum::<f64>().sqrt() <= tol)
        .map_or(trace.horizon + 1.0, |k| trace.times[k] - t0)
}

/// Result of one black-box evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub feasible: bool,
    pub trace_id: Option<String>,
}

impl EvalOutcome {
    pub fn new(objective: f64, constraints: Vec<f64>) -> Self {
        let feasible = constraints.iter().all(|&g| g <= FEASIBILITY_TOL);
        Self { objective, constraints, feasible, trace_id: None }
    }
}

pub(crate) struct ControlStep {
    pub u: Option<DVector<f64>>,
    pub status: SampleStatus,
    pub margin: f64,
}

/// Closed-loop behavior a task plugs into the simulation loop.
pub(crate) trait Episode {
    fn plant(&self) -> &dyn ControlAffine;
    fn control(&mut self, x: &DVector<f64>) -> ControlStep;
    fn barrier_values(&self, x: &DVector<f64>) -> Vec<f64>;
    fn settled(&self, x: &DVector<f64>) -> bool;
    fn input_reference(&self, _x: &DVector<f64>) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TraceMeta {
    pub target: Vec<f64>,
    pub angle_wrap: Vec<bool>,
    pub state_names: Vec<&'static str>,
    pub input_names: Vec<&'static str>,
    pub barrier_names: Vec<&'static str>,
}

/// Integration settings shared by every task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SimSettings {
    pub dt: f64,
    pub control_period: f64,
    pub horizon: f64,
}

impl SimSettings {
    /// Inner steps per control update; the period is quantized to whole steps.
    pub fn control_steps(&self) -> usize {
        ((self.control_period / self.dt).round() as usize).max(1)
    }
}

fn rk4_step(plant: &dyn ControlAffine, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64> {
    let k1 = plant.derivative(x, u);
    let k2 = plant.derivative(&(x + &k1 * (0.5 * dt)), u);
    let k3 = plant.derivative(&(x + &k2 * (0.5 * dt)), u);
    let k4 = plant.derivative(&(x + &k3 * dt), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

pub(crate) fn run_episode(
    episode: &mut dyn Episode,
    x0: DVector<f64>,
    settings: SimSettings,
    meta: TraceMeta,
) -> EpisodeTrace {
    let n_steps = (settings.horizon / settings.dt).round() as usize;
    let period = settings.control_steps();
    let m = episode.plant().input_dim();
    let has_reference = episode.input_reference(&x0).is_some();
    let mut trace = EpisodeTrace {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        inputs: Vec::with_capacity(n_steps + 1),
        barriers: Vec::with_capacity(n_steps + 1),
        qp_status: Vec::with_capacity(n_steps + 1),
        qp_margin: Vec::with_capacity(n_steps + 1),
        input_reference: has_reference.then(|| Vec::with_capacity(n_steps + 1)),
        termination: TerminationReason::Timeout,
        horizon: settings.horizon,
        target: meta.target,
        angle_wrap: meta.angle_wrap,
        state_names: meta.state_names.iter().map(|s| s.to_string()).collect(),
        input_names: meta.input_names.iter().map(|s| s.to_string()).collect(),
        barrier_names: meta.barrier_names.iter().map(|s| s.to_string()).collect(),
    };
    let mut x = x0;
    let mut held = DVector::zeros(m);
    let mut status = SampleStatus::None;
    let mut margin = f64::NAN;
    for k in 0..=n_steps {
        if x.iter().any(|v| !v.is_finite() || v.abs() > STATE_LIMIT) {
            trace.termination = TerminationReason::StateViolation;
            break;
        }
        let mut failed = false;
        if k % period == 0 {
            let step = episode.control(&x);
            status = step.status;
            margin = step.margin;
            match step.u {
                Some(u) if u.iter().all(|v| v.is_finite()) => held = u,
                _ => failed = true,
            }
        }
        trace.times.push(k as f64 * settings.dt);
        trace.states.push(x.iter().copied().collect());
        trace.inputs.push(held.iter().copied().collect());
        trace.barriers.push(episode.barrier_values(&x));
        trace.qp_status.push(if failed { SampleStatus::Infeasible } else { status });
        trace.qp_margin.push(margin);
        if let Some(refs) = trace.input_reference.as_mut() {
            refs.push(episode.input_reference(&x).unwrap_or_else(|| vec![0.0; m]));
        }
        if failed {
            trace.termination = TerminationReason::QpInfeasible;
            break;
        }
        if episode.settled(&x) {
            trace.termination = TerminationReason::Settled;
            break;
        }
        if k == n_steps {
            trace.termination = TerminationReason::Timeout;
            break;
        }
        x = rk4_step(episode.plant(), &x, &held, settings.dt);
    }
    trace
}

/// One of the benchmark tasks with its physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    PointMassTracking(PointMassTracking),
    DoubleIntegratorLqr(DoubleIntegratorLqr),
    CartPoleSwingUp(CartPoleSwingUp),
    Acc(AccTask),
}

impl TaskSpec {
    pub fn id(&self) -> &'static str {
        match self {
            Self::PointMassTracking(_) => "point_mass_tracking",
            Self::DoubleIntegratorLqr(_) => "double_integrator_lqr",
            Self::CartPoleSwingUp(_) => "cart_pole_swing_up",
            Self::Acc(_) => "acc",
        }
    }

    /// Default parameters for a task id.
    pub fn from_id(id: &str) -> Option<Self> {
        Some(match id {
            "point_mass_tracking" => Self::PointMassTracking(PointMassTracking::default()),
            "double_integrator_lqr" => Self::DoubleIntegratorLqr(DoubleIntegratorLqr::default()),
            "cart_pole_swing_up" => Self::CartPoleSwingUp(CartPoleSwingUp::default()),
            "acc" => Self::Acc(AccTask::default()),
            _ => return None,
        })
    }

    pub fn search_space(&self) -> SearchSpace {
        match self {
            Self::PointMassTracking(t) => t.search_space(),
            Self::DoubleIntegratorLqr(t) => t.search_space(),
            Self::CartPoleSwingUp(t) => t.search_space(),
            Self::Acc(t) => t.search_space(),
        }
    }

    pub fn num_constraints(&self) -> usize {
        match self {
            Self::PointMassTracking(_) => 1,
            Self::DoubleIntegratorLqr(t) => usize::from(t.state_box.is_some()),
            Self::CartPoleSwingUp(_) | Self::Acc(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            Self::PointMassTracking(t) => t.validate(),
            Self::DoubleIntegratorLqr(t) => t.validate(),
            Self::CartPoleSwingUp(t) => t.validate(),
            Self::Acc(t) => t.validate(),
        }
    }

    fn check_point(&self, z: &[f64]) -> Result<(), EnvError> {
        if !self.search_space().contains(z, 1e-9) {
            return Err(EnvError::InvalidArgument(format!("configuration {z:?} outside the search space")));
        }
        Ok(())
    }

    /// Simulates the closed loop for configuration `z`. The plants are
    /// noise-free, so the seed does not change the result.
    pub fn integrate_episode(&self, z: &[f64], _seed: u64) -> Result<EpisodeTrace, EnvError> {
        self.validate()?;
        self.check_point(z)?;
        match self {
            Self::PointMassTracking(t) => t.simulate(z),
            Self::DoubleIntegratorLqr(t) => t.simulate(z),
            Self::CartPoleSwingUp(t) => t.simulate(z),
            Self::Acc(t) => t.simulate(z),
        }
    }

    /// Scores a trace produced by [`TaskSpec::integrate_episode`].
    pub fn score(&self, trace: &EpisodeTrace) -> EvalOutcome {
        match self {
            Self::PointMassTracking(t) => t.score(trace),
            Self::DoubleIntegratorLqr(t) => t.score(trace),
            Self::CartPoleSwingUp(t) => t.score(trace),
            Self::Acc(t) => t.score(trace),
        }
    }

    pub fn evaluate(&self, z: &[f64], seed: u64) -> Result<EvalOutcome, EnvError> {
        let trace = self.integrate_episode(z, seed)?;
        Ok(self.score(&trace))
    }
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<(), EnvError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(EnvError::InvalidArgument(format!("{name} must be positive, got {value}")))
    }
}

pub(crate) fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_trace(states: Vec<Vec<f64>>, dt: f64) -> EpisodeTrace {
        let n = states.len();
        EpisodeTrace {
            times: (0..n).map(|k| k as f64 * dt).collect(),
            inputs: vec![vec![0.0]; n],
            barriers: vec![vec![]; n],
            qp_status: vec![SampleStatus::None; n],
            qp_margin: vec![f64::NAN; n],
            input_reference: None,
            termination: TerminationReason::Timeout,
            horizon: (n - 1) as f64 * dt,
            target: vec![0.0; states[0].len()],
            angle_wrap: vec![false; states[0].len()],
            state_names: vec![],
            input_names: vec![],
            barrier_names: vec![],
            states,
        }
    }

    #[test]
    fn cost_of_zero_trace_is_zero() {
        let t = flat_trace(vec![vec![0.0, 0.0]; 11], 0.1);
        assert_eq!(lqr_cost(&t, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)), 0.0);
    }

    #[test]
    fn cost_of_constant_unit_state_is_duration() {
        let t = flat_trace(vec![vec![1.0, 0.0]; 201], 0.01);
        let c = lqr_cost(&t, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1));
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn response_time_edge_cases() {
        let t = flat_trace(vec![vec![0.0]; 5], 0.5);
        assert_eq!(response_time(&t, &[0.0], 0.1), 0.0);
        assert_eq!(response_time(&t, &[3.0], 0.1), t.horizon + 1.0);
    }

    #[test]
    fn feasibility_flag_uses_tolerance() {
        assert!(EvalOutcome::new(1.0, vec![1e-10, -3.0]).feasible);
        assert!(!EvalOutcome::new(1.0, vec![1e-8]).feasible);
        assert!(EvalOutcome::new(1.0, vec![]).feasible);
    }

    #[test]
    fn task_ids_round_trip() {
        for id in ["point_mass_tracking", "double_integrator_lqr", "cart_pole_swing_up", "acc"] {
            assert_eq!(TaskSpec::from_id(id).unwrap().id(), id);
        }
        assert!(TaskSpec::from_id("pendulum").is_none());
    }
}
