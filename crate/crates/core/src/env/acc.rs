//! Adaptive cruise control behind a leader at constant speed.
//!
//! State is `[v, d]`: ego speed and gap to the leader. The filter works in
//! acceleration units `u / m`, so its objective `(u/m - F_r/m)^2 + k delta^2`
//! equals the mass-scaled force objective exactly. Traces report forces in
//! newtons.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    diag, lqr_cost, require_positive, run_episode, ControlStep, EnvError, Episode, EpisodeTrace, EvalOutcome,
    SampleStatus, SimSettings, TerminationReason, TraceMeta,
};
use crate::ctrl::{safety_filter, BarrierShape, BarrierSpec, ClfSpec, ControlAffine, FilterConfig};
use crate::opt::{Dimension, ParamCategory, SearchSpace};

const KMH: f64 = 1.0 / 3.6;

/// `z = [alpha, k, f]`: barrier gain, slack weight and update frequency in
/// units of `1 / base_period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccTask {
    pub mass: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub gravity: f64,
    pub lead_speed_kmh: f64,
    pub initial_speed_kmh: f64,
    pub initial_gap: f64,
    pub min_gap: f64,
    /// Input bound as a multiple of `m g`.
    pub input_limit_g: f64,
    pub clf_rate: f64,
    pub ecbf_mu: f64,
    pub alpha_range: [f64; 2],
    pub slack_range: [f64; 2],
    pub frequency_range: [f64; 2],
    /// Control period at `f = 1`.
    pub base_period: f64,
    pub dt: f64,
    pub horizon: f64,
}

impl Default for AccTask {
    fn default() -> Self {
        Self {
            mass: 1650.0,
            f0: 2.0,
            f1: 5.0,
            f2: 3.0,
            gravity: 9.81,
            lead_speed_kmh: 64.0,
            initial_speed_kmh: 103.0,
            initial_gap: 31.4,
            min_gap: 10.0,
            input_limit_g: 0.4,
            clf_rate: 1.0,
            ecbf_mu: 0.5,
            alpha_range: [0.1, 10.0],
            slack_range: [0.1, 10.0],
            frequency_range: [0.1, 1.0],
            base_period: 0.01,
            dt: 1e-3,
            horizon: 60.0,
        }
    }
}

/// Rolling and aerodynamic resistance `f0 + f1 v + f2 v^2`.
fn resistance(task: &AccTask, v: f64) -> f64 {
    task.f0 + task.f1 * v + task.f2 * v * v
}

/// `[v', d']` for force `u` in newtons.
pub fn acc_dynamics(state: &[f64; 2], u: f64, task: &AccTask) -> [f64; 2] {
    let [v, _] = *state;
    [(-resistance(task, v) + u) / task.mass, task.lead_speed_kmh * KMH - v]
}

/// Longitudinal plant with input in acceleration units.
#[derive(Debug, Clone)]
pub struct AccPlant {
    task: AccTask,
}

impl AccPlant {
    pub fn new(task: AccTask) -> Self {
        Self { task }
    }
}

impl ControlAffine for AccPlant {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = &self.task;
        DVector::from_vec(vec![-resistance(t, x[0]) / t.mass, t.lead_speed_kmh * KMH - x[0]])
    }
    fn input_matrix(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0])
    }
}

impl AccTask {
    pub fn lead_speed(&self) -> f64 {
        self.lead_speed_kmh * KMH
    }

    pub fn accel_limit(&self) -> f64 {
        self.input_limit_g * self.gravity
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::new("alpha", self.alpha_range[0], self.alpha_range[1], true, ParamCategory::Safety),
            Dimension::new("k", self.slack_range[0], self.slack_range[1], true, ParamCategory::Control),
            Dimension::new("f", self.frequency_range[0], self.frequency_range[1], true, ParamCategory::Deployment),
        ])
        .expect("validated ranges")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for (name, v) in [
            ("mass", self.mass),
            ("f0", self.f0),
            ("f1", self.f1),
            ("f2", self.f2),
            ("gravity", self.gravity),
            ("lead_speed_kmh", self.lead_speed_kmh),
            ("initial_gap", self.initial_gap),
            ("min_gap", self.min_gap),
            ("input_limit_g", self.input_limit_g),
            ("ecbf_mu", self.ecbf_mu),
            ("alpha_range lower", self.alpha_range[0]),
            ("slack_range lower", self.slack_range[0]),
            ("frequency_range lower", self.frequency_range[0]),
            ("base_period", self.base_period),
            ("dt", self.dt),
            ("horizon", self.horizon),
        ] {
            require_positive(name, v)?;
        }
        if !(self.initial_speed_kmh >= 0.0) || !(self.clf_rate >= 0.0) {
            return Err(EnvError::InvalidArgument("initial speed and CLF rate must be nonnegative".into()));
        }
        for r in [self.alpha_range, self.slack_range, self.frequency_range] {
            if r[0] >= r[1] {
                return Err(EnvError::InvalidArgument("empty parameter range".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn simulate(&self, z: &[f64]) -> Result<EpisodeTrace, EnvError> {
        let (alpha, k, f) = (z[0], z[1], z[2]);
        let a_max = self.accel_limit();
        let mut episode = AccEpisode {
            task: self,
            plant: AccPlant::new(self.clone()),
            barrier: BarrierSpec::exponential(
                BarrierShape::Gap { gap: 1, speed: 0, min_gap: self.min_gap },
                alpha,
                self.ecbf_mu,
            )?,
            clf: ClfSpec::new(0, self.lead_speed(), self.clf_rate, k)?,
            filter: FilterConfig::with_box(0.0, &[-a_max], &[a_max])?,
        };
        let settings = SimSettings { dt: self.dt, control_period: self.base_period / f, horizon: self.horizon };
        let meta = TraceMeta {
            target: vec![self.lead_speed(), self.min_gap],
            angle_wrap: vec![false; 2],
            state_names: vec!["v", "d"],
            input_names: vec!["u"],
            barrier_names: vec!["h"],
        };
        let x0 = DVector::from_vec(vec![self.initial_speed_kmh * KMH, self.initial_gap]);
        let mut trace = run_episode(&mut episode, x0, settings, meta);
        for row in trace.inputs.iter_mut().chain(trace.input_reference.iter_mut().flatten()) {
            row.iter_mut().for_each(|u| *u *= self.mass);
        }
        Ok(trace)
    }

    pub(crate) fn score(&self, trace: &EpisodeTrace) -> EvalOutcome {
        let v0 = self.lead_speed();
        let q = diag(&[1.0 / (v0 * v0), 1.0 / (self.min_gap * self.min_gap)]);
        let r = lqr_cost(trace, &q, &diag(&[1.0 / (self.mass * self.mass)]));
        let gap_violation = trace.states.iter().map(|s| self.min_gap - s[1]).fold(f64::NEG_INFINITY, f64::max);
        let worst_margin = trace
            .qp_margin
            .iter()
            .filter(|m| m.is_finite())
            .map(|m| m / self.accel_limit())
            .fold(-1.0, f64::max);
        let qp_failure = match trace.termination {
            TerminationReason::QpInfeasible | TerminationReason::StateViolation => worst_margin.max(0.0) + 1.0,
            TerminationReason::Settled | TerminationReason::Timeout => worst_margin,
        };
        EvalOutcome::new(r, vec![gap_violation, qp_failure])
    }
}

struct AccEpisode<'a> {
    task: &'a AccTask,
    plant: AccPlant,
    barrier: BarrierSpec,
    clf: ClfSpec,
    filter: FilterConfig,
}

impl Episode for AccEpisode<'_> {
    fn plant(&self) -> &dyn ControlAffine {
        &self.plant
    }

    fn control(&mut self, x: &DVector<f64>) -> ControlStep {
        let u_ref = DVector::from_element(1, resistance(self.task, x[0]) / self.task.mass);
        match safety_filter(&self.plant, std::slice::from_ref(&self.barrier), Some(&self.clf), &u_ref, x, &self.filter) {
            Ok(out) => ControlStep { u: out.u, status: out.status.into(), margin: out.feasibility_margin },
            Err(_) => ControlStep { u: None, status: SampleStatus::Infeasible, margin: f64::NAN },
        }
    }

    fn barrier_values(&self, x: &DVector<f64>) -> Vec<f64> {
        vec![self.barrier.value(x)]
    }

    fn settled(&self, _x: &DVector<f64>) -> bool {
        false
    }

    fn input_reference(&self, x: &DVector<f64>) -> Option<Vec<f64>> {
        Some(vec![resistance(self.task, x[0]) / self.task.mass])
    }
}
