//! Cart-pole swing-up with an exponential barrier on the cart position.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    diag, lqr_cost, require_positive, response_time, run_episode, ControlStep, EnvError, Episode, EpisodeTrace,
    EvalOutcome, SampleStatus, SimSettings, TerminationReason, TraceMeta,
};
use crate::ctrl::{
    care_solve, energy_shaping_nominal, safety_filter, switched_controller, BarrierShape, BarrierSpec, CartPole,
    CartPoleParams, ControlAffine, FilterConfig, SwingUpGains, SwitchMode,
};
use crate::opt::{Dimension, ParamCategory, SearchSpace};

/// `z = [k_E, k_p, k_d, alpha, mu]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleSwingUp {
    pub params: CartPoleParams,
    pub input_limit: f64,
    /// Enforce the input limit as filter rows. When false the filter sees
    /// only the barrier row and its output is saturated afterwards.
    pub bounds_in_filter: bool,
    pub x0: f64,
    pub theta0: f64,
    pub x_target: f64,
    pub x_limit: f64,
    pub q_diag: [f64; 4],
    pub r: f64,
    pub eta: f64,
    pub param_range: [f64; 2],
    pub dt: f64,
    pub control_period: f64,
    pub horizon: f64,
    /// Deadline on the response time for the timeout constraint.
    pub settle_deadline: f64,
    pub response_tol: f64,
    pub settle_tol: f64,
}

impl Default for CartPoleSwingUp {
    fn default() -> Self {
        Self {
            params: CartPoleParams::default(),
            input_limit: 100.0,
            bounds_in_filter: false,
            x0: -1.0,
            theta0: 0.0,
            x_target: 1.0,
            x_limit: 3.0,
            q_diag: [1.0; 4],
            r: 1e-2,
            eta: 1.0,
            param_range: [0.01, 100.0],
            dt: 1e-3,
            control_period: 0.01,
            horizon: 20.0,
            settle_deadline: 15.0,
            response_tol: 0.05,
            settle_tol: 1e-3,
        }
    }
}

impl CartPoleSwingUp {
    pub fn search_space(&self) -> SearchSpace {
        let [lo, hi] = self.param_range;
        SearchSpace::new(vec![
            Dimension::new("k_E", lo, hi, true, ParamCategory::Control),
            Dimension::new("k_p", lo, hi, true, ParamCategory::Control),
            Dimension::new("k_d", lo, hi, true, ParamCategory::Control),
            Dimension::new("alpha", lo, hi, true, ParamCategory::Safety),
            Dimension::new("mu", lo, hi, true, ParamCategory::Safety),
        ])
        .expect("validated ranges")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let p = &self.params;
        for (name, v) in [
            ("gravity", p.gravity),
            ("length", p.length),
            ("cart_mass", p.cart_mass),
            ("pole_mass", p.pole_mass),
            ("input_limit", self.input_limit),
            ("x_limit", self.x_limit),
            ("r", self.r),
            ("eta", self.eta),
            ("param_range lower", self.param_range[0]),
            ("dt", self.dt),
            ("control_period", self.control_period),
            ("horizon", self.horizon),
            ("settle_deadline", self.settle_deadline),
            ("response_tol", self.response_tol),
            ("settle_tol", self.settle_tol),
        ] {
            require_positive(name, v)?;
        }
        if self.param_range[0] >= self.param_range[1] {
            return Err(EnvError::InvalidArgument("empty parameter range".into()));
        }
        if self.x0.abs() >= self.x_limit || self.x_target.abs() >= self.x_limit {
            return Err(EnvError::InvalidArgument("start and target must lie inside the position limit".into()));
        }
        Ok(())
    }

    /// Upright target `[x_d, 0, pi, 0]`.
    pub fn target(&self) -> [f64; 4] {
        [self.x_target, 0.0, PI, 0.0]
    }

    /// LQR gain for the upright linearization with the performance weights.
    pub fn lqr_gain(&self) -> Result<DMatrix<f64>, EnvError> {
        let (a, b) = CartPole::new(self.params).upright_linearization();
        Ok(care_solve(&a, &b, &diag(&self.q_diag), &diag(&[self.r]))?.k)
    }

    fn barrier_shape(&self) -> BarrierShape {
        BarrierShape::PositionLimit { position: 0, velocity: 1, limit: self.x_limit }
    }

    pub(crate) fn simulate(&self, z: &[f64]) -> Result<EpisodeTrace, EnvError> {
        let gains = SwingUpGains { k_e: z[0], k_p: z[1], k_d: z[2] };
        let barrier = BarrierSpec::exponential(self.barrier_shape(), z[3], z[4])?;
        let filter = if self.bounds_in_filter {
            FilterConfig::with_box(0.0, &[-self.input_limit], &[self.input_limit])?
        } else {
            FilterConfig::new(0.0, vec![])?
        };
        let mut episode = SwingUpEpisode {
            task: self,
            plant: CartPole::new(self.params),
            gains,
            barrier,
            filter,
            k_lqr: self.lqr_gain()?,
            target: DVector::from_column_slice(&self.target()),
            mode: SwitchMode::Swing,
        };
        let settings = SimSettings { dt: self.dt, control_period: self.control_period, horizon: self.horizon };
        let meta = TraceMeta {
            target: self.target().to_vec(),
            angle_wrap: vec![false, false, true, false],
            state_names: vec!["x", "v", "theta", "omega"],
            input_names: vec!["u"],
            barrier_names: vec!["h_x"],
        };
        let x0 = DVector::from_vec(vec![self.x0, 0.0, self.theta0, 0.0]);
        Ok(run_episode(&mut episode, x0, settings, meta))
    }

    pub(crate) fn score(&self, trace: &EpisodeTrace) -> EvalOutcome {
        let r = lqr_cost(trace, &diag(&self.q_diag), &diag(&[self.r]));
        let limit2 = self.x_limit * self.x_limit;
        let worst = trace.states.iter().map(|s| (s[0] * s[0] - limit2) / limit2).fold(f64::NEG_INFINITY, f64::max);
        let failure = match trace.termination {
            TerminationReason::QpInfeasible | TerminationReason::StateViolation => worst.max(0.0) + 1.0,
            TerminationReason::Settled | TerminationReason::Timeout => worst,
        };
        let timeout = response_time(trace, &self.target(), self.response_tol) - self.settle_deadline;
        EvalOutcome::new(r, vec![failure, timeout])
    }
}

struct SwingUpEpisode<'a> {
    task: &'a CartPoleSwingUp,
    plant: CartPole,
    gains: SwingUpGains,
    barrier: BarrierSpec,
    filter: FilterConfig,
    k_lqr: DMatrix<f64>,
    target: DVector<f64>,
    mode: SwitchMode,
}

impl Episode for SwingUpEpisode<'_> {
    fn plant(&self) -> &dyn ControlAffine {
        &self.plant
    }

    fn control(&mut self, x: &DVector<f64>) -> ControlStep {
        let u_d = energy_shaping_nominal(x, &self.gains, &self.plant.params);
        let (u_nom, mode) = switched_controller(x, u_d, self.task.eta, &self.k_lqr, &self.target, self.mode);
        self.mode = mode;
        let u_ref = DVector::from_element(1, u_nom);
        match safety_filter(&self.plant, std::slice::from_ref(&self.barrier), None, &u_ref, x, &self.filter) {
            Ok(out) => {
                let limit = self.task.input_limit;
                let u = out.u.map(|u| u.map(|v| v.clamp(-limit, limit)));
                ControlStep { u, status: out.status.into(), margin: out.feasibility_margin }
            }
            Err(_) => ControlStep { u: None, status: SampleStatus::Infeasible, margin: f64::NAN },
        }
    }

    fn barrier_values(&self, x: &DVector<f64>) -> Vec<f64> {
        vec![self.barrier.value(x)]
    }

    fn settled(&self, x: &DVector<f64>) -> bool {
        if self.mode != SwitchMode::Lqr {
            return false;
        }
        let mut e = x - &self.target;
        e[2] = crate::ctrl::wrap_angle(e[2]);
        e.norm() <= self.task.settle_tol
    }
}
