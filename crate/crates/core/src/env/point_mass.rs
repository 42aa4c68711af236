//! Planar single integrator tracking a target past a circular obstacle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    diag, lqr_cost, require_positive, response_time, run_episode, ControlStep, EnvError, Episode, EpisodeTrace,
    EvalOutcome, SampleStatus, SimSettings, TraceMeta,
};
use crate::ctrl::{safety_filter, BarrierShape, BarrierSpec, ControlAffine, FilterConfig};
use crate::opt::{Dimension, ParamCategory, SearchSpace};

/// `z = [alpha, k_p]`: barrier gain and proportional tracking gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassTracking {
    pub x0: [f64; 2],
    pub target: [f64; 2],
    pub obstacle_center: [f64; 2],
    /// Zero removes the obstacle and the filter.
    pub obstacle_radius: f64,
    pub q_diag: [f64; 2],
    pub r_diag: [f64; 2],
    pub response_tol: f64,
    pub response_deadline: f64,
    pub alpha_range: [f64; 2],
    pub kp_range: [f64; 2],
    pub dt: f64,
    pub control_period: f64,
    pub horizon: f64,
    pub settle_tol: f64,
}

impl Default for PointMassTracking {
    fn default() -> Self {
        Self {
            x0: [0.0, 1.0],
            target: [3.0, 1.0],
            obstacle_center: [1.5, 0.8],
            obstacle_radius: 0.8,
            q_diag: [1.0, 1.0],
            r_diag: [2.0, 2.0],
            response_tol: 0.1,
            response_deadline: 0.85,
            alpha_range: [0.1, 10.0],
            kp_range: [0.1, 10.0],
            dt: 1e-3,
            control_period: 0.01,
            horizon: 20.0,
            settle_tol: 1e-4,
        }
    }
}

struct Planar;

impl ControlAffine for Planar {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn drift(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(2)
    }
    fn input_matrix(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
}

struct PointMassEpisode<'a> {
    task: &'a PointMassTracking,
    kp: f64,
    barrier: Option<BarrierSpec>,
    filter: FilterConfig,
}

impl PointMassTracking {
    /// Three illustrative configurations `[alpha, k_p]`: a slow baseline that
    /// misses the deadline, the same gain with a looser barrier, and the
    /// baseline barrier with a faster gain.
    pub fn reference_configs() -> [[f64; 2]; 3] {
        [[1.0, 5.0], [10.0, 5.0], [1.0, 7.0]]
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::new("alpha", self.alpha_range[0], self.alpha_range[1], true, ParamCategory::Safety),
            Dimension::new("k_p", self.kp_range[0], self.kp_range[1], true, ParamCategory::Control),
        ])
        .expect("validated ranges")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for (name, v) in [
            ("response_tol", self.response_tol),
            ("response_deadline", self.response_deadline),
            ("dt", self.dt),
            ("control_period", self.control_period),
            ("horizon", self.horizon),
            ("settle_tol", self.settle_tol),
            ("alpha_range lower", self.alpha_range[0]),
            ("kp_range lower", self.kp_range[0]),
        ] {
            require_positive(name, v)?;
        }
        if !(self.obstacle_radius >= 0.0) {
            return Err(EnvError::InvalidArgument("obstacle_radius must be nonnegative".into()));
        }
        if self.alpha_range[0] >= self.alpha_range[1] || self.kp_range[0] >= self.kp_range[1] {
            return Err(EnvError::InvalidArgument("empty parameter range".into()));
        }
        Ok(())
    }

    fn barrier_shape(&self) -> BarrierShape {
        BarrierShape::Circle {
            position: vec![0, 1],
            center: self.obstacle_center.to_vec(),
            radius: self.obstacle_radius,
        }
    }

    pub(crate) fn simulate(&self, z: &[f64]) -> Result<EpisodeTrace, EnvError> {
        let (alpha, kp) = (z[0], z[1]);
        let barrier = if self.obstacle_radius > 0.0 { Some(BarrierSpec::new(self.barrier_shape(), alpha)?) } else { None };
        let mut episode = PointMassEpisode { task: self, kp, barrier, filter: FilterConfig::new(0.0, vec![])? };
        let settings = SimSettings { dt: self.dt, control_period: self.control_period, horizon: self.horizon };
        let meta = TraceMeta {
            target: self.target.to_vec(),
            angle_wrap: vec![false; 2],
            state_names: vec!["x1", "x2"],
            input_names: vec!["u1", "u2"],
            barrier_names: vec!["h"],
        };
        Ok(run_episode(&mut episode, DVector::from_column_slice(&self.x0), settings, meta))
    }

    pub(crate) fn score(&self, trace: &EpisodeTrace) -> EvalOutcome {
        let r = lqr_cost(trace, &diag(&self.q_diag), &diag(&self.r_diag));
        let t = response_time(trace, &self.target, self.response_tol);
        EvalOutcome::new(r, vec![t - self.response_deadline])
    }
}

impl Episode for PointMassEpisode<'_> {
    fn plant(&self) -> &dyn ControlAffine {
        &Planar
    }

    fn control(&mut self, x: &DVector<f64>) -> ControlStep {
        let u_ref = (DVector::from_column_slice(&self.task.target) - x) * self.kp;
        match &self.barrier {
            None => ControlStep { u: Some(u_ref), status: SampleStatus::None, margin: f64::NAN },
            Some(b) => match safety_filter(&Planar, std::slice::from_ref(b), None, &u_ref, x, &self.filter) {
                Ok(out) => ControlStep { u: out.u, status: out.status.into(), margin: out.feasibility_margin },
                Err(_) => ControlStep { u: None, status: SampleStatus::Infeasible, margin: f64::NAN },
            },
        }
    }

    fn barrier_values(&self, x: &DVector<f64>) -> Vec<f64> {
        vec![self.task.barrier_shape().value(x)]
    }

    fn settled(&self, x: &DVector<f64>) -> bool {
        let e = x - DVector::from_column_slice(&self.task.target);
        e.norm() <= self.task.settle_tol
    }
}
