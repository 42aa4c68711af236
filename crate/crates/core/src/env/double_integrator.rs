//! Double integrator under linear state feedback `u = K [x, x']`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    diag, lqr_cost, require_positive, run_episode, ControlStep, EnvError, Episode, EpisodeTrace, EvalOutcome,
    SampleStatus, SimSettings, TraceMeta,
};
use crate::ctrl::ControlAffine;
use crate::opt::{Dimension, ParamCategory, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleIntegratorLqr {
    pub x0: [f64; 2],
    pub q_diag: [f64; 2],
    pub r: f64,
    /// Both position and velocity must stay in `[lower, upper]` when set.
    pub state_box: Option<[f64; 2]>,
    pub gain_range: [f64; 2],
    pub dt: f64,
    pub control_period: f64,
    pub horizon: f64,
    pub settle_tol: f64,
}

impl Default for DoubleIntegratorLqr {
    fn default() -> Self {
        Self {
            x0: [1.0, 1.0],
            q_diag: [1.0, 1.0],
            r: 1.0,
            state_box: None,
            gain_range: [-5.0, -0.001],
            dt: 1e-3,
            control_period: 0.01,
            horizon: 20.0,
            settle_tol: 1e-4,
        }
    }
}

impl DoubleIntegratorLqr {
    /// The variant with the `[-0.4, 1.2]` state box.
    pub fn safe() -> Self {
        Self { state_box: Some([-0.4, 1.2]), ..Self::default() }
    }

    pub fn system_matrices() -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), DMatrix::from_row_slice(2, 1, &[0.0, 1.0]))
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::new("k1", self.gain_range[0], self.gain_range[1], false, ParamCategory::Control),
            Dimension::new("k2", self.gain_range[0], self.gain_range[1], false, ParamCategory::Control),
        ])
        .expect("validated ranges")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for (name, v) in [
            ("r", self.r),
            ("dt", self.dt),
            ("control_period", self.control_period),
            ("horizon", self.horizon),
            ("settle_tol", self.settle_tol),
        ] {
            require_positive(name, v)?;
        }
        if self.gain_range[0] >= self.gain_range[1] {
            return Err(EnvError::InvalidArgument("empty gain range".into()));
        }
        if let Some([lo, hi]) = self.state_box {
            if lo >= hi {
                return Err(EnvError::InvalidArgument("empty state box".into()));
            }
        }
        Ok(())
    }

    fn box_violation(&self, x: &[f64]) -> Option<f64> {
        self.state_box.map(|[lo, hi]| x.iter().map(|&v| (v - hi).max(lo - v)).fold(f64::NEG_INFINITY, f64::max))
    }

    pub(crate) fn simulate(&self, z: &[f64]) -> Result<EpisodeTrace, EnvError> {
        let mut episode = DiEpisode { task: self, gain: [z[0], z[1]] };
        let settings = SimSettings { dt: self.dt, control_period: self.control_period, horizon: self.horizon };
        let meta = TraceMeta {
            target: vec![0.0, 0.0],
            angle_wrap: vec![false; 2],
            state_names: vec!["x", "xdot"],
            input_names: vec!["u"],
            barrier_names: if self.state_box.is_some() { vec!["h_box"] } else { vec![] },
        };
        Ok(run_episode(&mut episode, DVector::from_column_slice(&self.x0), settings, meta))
    }

    pub(crate) fn score(&self, trace: &EpisodeTrace) -> EvalOutcome {
        let r = lqr_cost(trace, &diag(&self.q_diag), &diag(&[self.r]));
        let g = match self.state_box {
            None => vec![],
            Some(_) => {
                let worst = trace.states.iter().filter_map(|x| self.box_violation(x)).fold(f64::NEG_INFINITY, f64::max);
                vec![worst]
            }
        };
        EvalOutcome::new(r, g)
    }
}

struct DoubleIntegrator;

impl ControlAffine for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[1], 0.0])
    }
    fn input_matrix(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0])
    }
}

struct DiEpisode<'a> {
    task: &'a DoubleIntegratorLqr,
    gain: [f64; 2],
}

impl Episode for DiEpisode<'_> {
    fn plant(&self) -> &dyn ControlAffine {
        &DoubleIntegrator
    }

    fn control(&mut self, x: &DVector<f64>) -> ControlStep {
        let u = self.gain[0] * x[0] + self.gain[1] * x[1];
        ControlStep { u: Some(DVector::from_element(1, u)), status: SampleStatus::None, margin: f64::NAN }
    }

    fn barrier_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.task.box_violation(x.as_slice()).map(|v| vec![-v]).unwrap_or_default()
    }

    fn settled(&self, x: &DVector<f64>) -> bool {
        x.norm() <= self.task.settle_tol
    }
}
