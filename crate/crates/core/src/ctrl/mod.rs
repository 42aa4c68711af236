//! Control synthesis: barrier and Lyapunov constraint rows, the QP safety
//! filter, a Riccati solver and the cart-pole swing-up controllers.

mod care;
mod swingup;

pub use care::{care_residual, care_solve, CareSolution};
pub use swingup::{
    energy_shaping_nominal, switched_controller, wrap_angle, CartPole, CartPoleParams, SwitchMode, SwingUpGains,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qp::{self, QpError, QpProblem, QpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtrlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("barrier has no input authority at this state and no second-order data")]
    DegenerateConstraint,
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// `x' = f(x) + g(x) u`.
pub trait ControlAffine {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64>;

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + self.input_matrix(x) * u
    }
}

/// Geometry of a barrier `h`. Safe set is `h >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BarrierShape {
    /// `h = ||x[position] - center|| - radius`.
    Circle { position: Vec<usize>, center: Vec<f64>, radius: f64 },
    /// `h = limit^2 - x[position]^2` where `x[position]' = x[velocity]`.
    PositionLimit { position: usize, velocity: usize, limit: f64 },
    /// `h = x[gap] - min_gap` where `x[gap]' = lead_speed - x[speed]`.
    Gap { gap: usize, speed: usize, min_gap: f64 },
    /// `h = coeffs . x + offset`.
    Affine { coeffs: Vec<f64>, offset: f64 },
}

impl BarrierShape {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Self::Circle { position, center, radius } => {
                position.iter().zip(center).map(|(&i, c)| (x[i] - c).powi(2)).sum::<f64>().sqrt() - radius
            }
            Self::PositionLimit { position, limit, .. } => limit * limit - x[*position] * x[*position],
            Self::Gap { gap, min_gap, .. } => x[*gap] - min_gap,
            Self::Affine { coeffs, offset } => coeffs.iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>() + offset,
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut grad = DVector::zeros(x.len());
        match self {
            Self::Circle { position, center, .. } => {
                let dist = position.iter().zip(center).map(|(&i, c)| (x[i] - c).powi(2)).sum::<f64>().sqrt();
                if dist > 0.0 {
                    for (&i, c) in position.iter().zip(center) {
                        grad[i] = (x[i] - c) / dist;
                    }
                }
            }
            Self::PositionLimit { position, .. } => grad[*position] = -2.0 * x[*position],
            Self::Gap { gap, .. } => grad[*gap] = 1.0,
            Self::Affine { coeffs, .. } => grad.iter_mut().zip(coeffs).for_each(|(g, a)| *g = *a),
        }
        grad
    }

    /// Gradient of `L_f h`, available for shapes whose kinematics are known.
    pub fn drift_derivative_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let mut grad = DVector::zeros(x.len());
        match self {
            Self::PositionLimit { position, velocity, .. } => {
                // L_f h = -2 x v
                grad[*position] = -2.0 * x[*velocity];
                grad[*velocity] = -2.0 * x[*position];
            }
            Self::Gap { speed, .. } => grad[*speed] = -1.0,
            Self::Circle { .. } | Self::Affine { .. } => return None,
        }
        Some(grad)
    }
}

/// A barrier with its class-K gain. With `ecbf_mu` set the row enforces the
/// exponential barrier `h' + mu h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub shape: BarrierShape,
    pub alpha: f64,
    pub ecbf_mu: Option<f64>,
}

impl BarrierSpec {
    pub fn new(shape: BarrierShape, alpha: f64) -> Result<Self, CtrlError> {
        Self::validated(Self { shape, alpha, ecbf_mu: None })
    }

    pub fn exponential(shape: BarrierShape, alpha: f64, mu: f64) -> Result<Self, CtrlError> {
        Self::validated(Self { shape, alpha, ecbf_mu: Some(mu) })
    }

    fn validated(self) -> Result<Self, CtrlError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(CtrlError::InvalidArgument(format!("alpha {}", self.alpha)));
        }
        if let Some(mu) = self.ecbf_mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(CtrlError::InvalidArgument(format!("ecbf mu {mu}")));
            }
        }
        Ok(self)
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.shape.value(x)
    }
}

/// Linear inequality `a . u <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub a: DVector<f64>,
    pub b: f64,
}

impl ConstraintRow {
    pub fn is_satisfied(&self, u: &DVector<f64>, tol: f64) -> bool {
        self.a.dot(u) <= self.b + tol
    }
}

/// Row `a . u <= b` equivalent to the barrier condition at `x`.
///
/// Relative degree one: `L_f h + L_g h u + alpha h >= 0`.
/// Exponential form with `G = grad(L_f h)`:
/// `G.(f + g u) + mu L_f h + alpha (L_f h + mu h) >= 0`.
pub fn cbf_row(dyn_: &dyn ControlAffine, barrier: &BarrierSpec, x: &DVector<f64>) -> Result<ConstraintRow, CtrlError> {
    if x.len() != dyn_.state_dim() {
        return Err(CtrlError::InvalidArgument(format!("state has {} entries, expected {}", x.len(), dyn_.state_dim())));
    }
    let f = dyn_.drift(x);
    let g = dyn_.input_matrix(x);
    let h = barrier.shape.value(x);
    let grad_h = barrier.shape.gradient(x);
    let lf_h = grad_h.dot(&f);
    let alpha = barrier.alpha;
    match barrier.ecbf_mu {
        None => {
            let lg_h = g.tr_mul(&grad_h);
            if lg_h.amax() <= 1e-12 {
                return Err(CtrlError::DegenerateConstraint);
            }
            Ok(ConstraintRow { a: -lg_h, b: lf_h + alpha * h })
        }
        Some(mu) => {
            let big_g = barrier.shape.drift_derivative_gradient(x).ok_or(CtrlError::DegenerateConstraint)?;
            let coeff = g.tr_mul(&big_g);
            Ok(ConstraintRow { a: -coeff, b: big_g.dot(&f) + mu * lf_h + alpha * (lf_h + mu * h) })
        }
    }
}

/// Lyapunov function `V = (x[index] - target)^2` enforced softly as
/// `L_f V + L_g V u + epsilon V <= delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfSpec {
    pub index: usize,
    pub target: f64,
    pub epsilon: f64,
    pub slack_weight: f64,
}

impl ClfSpec {
    pub fn new(index: usize, target: f64, epsilon: f64, slack_weight: f64) -> Result<Self, CtrlError> {
        if !(slack_weight > 0.0 && slack_weight.is_finite()) || !(epsilon >= 0.0) {
            return Err(CtrlError::InvalidArgument("need slack_weight > 0 and epsilon >= 0".into()));
        }
        Ok(Self { index, target, epsilon, slack_weight })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x[self.index] - self.target).powi(2)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        g[self.index] = 2.0 * (x[self.index] - self.target);
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub regularization_lambda: f64,
    pub input_bounds: Vec<ConstraintRow>,
}

impl FilterConfig {
    pub fn new(regularization_lambda: f64, input_bounds: Vec<ConstraintRow>) -> Result<Self, CtrlError> {
        if !(regularization_lambda >= 0.0 && regularization_lambda.is_finite()) {
            return Err(CtrlError::InvalidArgument(format!("lambda {regularization_lambda}")));
        }
        Ok(Self { regularization_lambda, input_bounds })
    }

    /// Box `lower <= u <= upper` as two rows per input.
    pub fn with_box(regularization_lambda: f64, lower: &[f64], upper: &[f64]) -> Result<Self, CtrlError> {
        if lower.len() != upper.len() {
            return Err(CtrlError::InvalidArgument("box bounds differ in length".into()));
        }
        let m = lower.len();
        let mut rows = Vec::with_capacity(2 * m);
        for i in 0..m {
            let e = DVector::from_fn(m, |j, _| if i == j { 1.0 } else { 0.0 });
            rows.push(ConstraintRow { a: e.clone(), b: upper[i] });
            rows.push(ConstraintRow { a: -e, b: -lower[i] });
        }
        Self::new(regularization_lambda, rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// `None` when the QP is infeasible.
    pub u: Option<DVector<f64>>,
    pub slack: f64,
    pub status: QpStatus,
    /// Phase-1 margin of the constraint rows, normalized per row. Negative
    /// means strictly feasible.
    pub feasibility_margin: f64,
}

/// Minimally invasive input: `min ||u - u_ref||^2 + lambda ||u||^2 + k delta^2`
/// subject to every barrier row, the optional CLF row and the input bounds.
pub fn safety_filter(
    dyn_: &dyn ControlAffine,
    barriers: &[BarrierSpec],
    clf: Option<&ClfSpec>,
    u_ref: &DVector<f64>,
    x: &DVector<f64>,
    cfg: &FilterConfig,
) -> Result<FilterOutput, CtrlError> {
    let m = dyn_.input_dim();
    if u_ref.len() != m {
        return Err(CtrlError::InvalidArgument(format!("reference input has {} entries, expected {m}", u_ref.len())));
    }
    let nv = m + usize::from(clf.is_some());
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut push = |a_u: &DVector<f64>, slack_coeff: f64, b: f64| {
        let mut a = DVector::zeros(nv);
        a.rows_mut(0, m).copy_from(a_u);
        if nv > m {
            a[m] = slack_coeff;
        }
        let norm = a.norm();
        if norm > 0.0 {
            rows.push((a / norm, b / norm));
        } else {
            rows.push((a, b));
        }
    };
    for barrier in barriers {
        let row = cbf_row(dyn_, barrier, x)?;
        push(&row.a, 0.0, row.b);
    }
    if let Some(clf) = clf {
        let f = dyn_.drift(x);
        let g = dyn_.input_matrix(x);
        let grad_v = clf.gradient(x);
        push(&g.tr_mul(&grad_v), -1.0, -grad_v.dot(&f) - clf.epsilon * clf.value(x));
    }
    for row in &cfg.input_bounds {
        if row.a.len() != m {
            return Err(CtrlError::InvalidArgument("input bound row has wrong width".into()));
        }
        push(&row.a, 0.0, row.b);
    }

    let mut hessian = DMatrix::identity(nv, nv) * (2.0 * (1.0 + cfg.regularization_lambda));
    let mut linear = DVector::zeros(nv);
    linear.rows_mut(0, m).copy_from(&(u_ref * -2.0));
    if let Some(clf) = clf {
        hessian[(m, m)] = 2.0 * clf.slack_weight;
    }
    let a = DMatrix::from_fn(rows.len(), nv, |i, j| rows[i].0[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let margin = qp::feasibility_margin(&a, &b);
    let problem = QpProblem::new(hessian, linear, a, b)?;
    let sol = qp::solve(&problem)?;
    Ok(match (sol.status, sol.primal) {
        (QpStatus::Optimal, Some(p)) => FilterOutput {
            u: Some(p.rows(0, m).into_owned()),
            slack: if nv > m { p[m] } else { 0.0 },
            status: QpStatus::Optimal,
            feasibility_margin: margin,
        },
        _ => FilterOutput { u: None, slack: 0.0, status: QpStatus::Infeasible, feasibility_margin: margin },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// `x' = u` in any dimension.
    pub(crate) struct Integrator(pub usize);

    impl ControlAffine for Integrator {
        fn state_dim(&self) -> usize {
            self.0
        }
        fn input_dim(&self) -> usize {
            self.0
        }
        fn drift(&self, _x: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(self.0)
        }
        fn input_matrix(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(self.0, self.0)
        }
    }

    #[test]
    fn scalar_integrator_row() {
        let barrier = BarrierSpec::new(BarrierShape::Affine { coeffs: vec![-1.0], offset: 0.0 }, 1.0).unwrap();
        let x = DVector::from_vec(vec![-0.7]);
        let row = cbf_row(&Integrator(1), &barrier, &x).unwrap();
        // -u - x >= 0  <=>  u <= -x
        assert_eq!(row.a[0], 1.0);
        assert_relative_eq!(row.b, 0.7);
    }

    #[test]
    fn far_obstacle_row_admits_zero_input() {
        let shape = BarrierShape::Circle { position: vec![0, 1], center: vec![1.5, 0.8], radius: 0.8 };
        let barrier = BarrierSpec::new(shape, 100.0).unwrap();
        let x = DVector::from_vec(vec![40.0, -30.0]);
        let row = cbf_row(&Integrator(2), &barrier, &x).unwrap();
        assert!(row.is_satisfied(&DVector::zeros(2), 0.0));
    }

    #[test]
    fn degenerate_rows_are_reported() {
        let barrier = BarrierSpec::new(BarrierShape::Affine { coeffs: vec![0.0], offset: 1.0 }, 1.0).unwrap();
        assert_eq!(cbf_row(&Integrator(1), &barrier, &DVector::zeros(1)), Err(CtrlError::DegenerateConstraint));
        let ecbf = BarrierSpec::exponential(BarrierShape::Affine { coeffs: vec![1.0], offset: 1.0 }, 1.0, 1.0).unwrap();
        assert_eq!(cbf_row(&Integrator(1), &ecbf, &DVector::zeros(1)), Err(CtrlError::DegenerateConstraint));
    }

    #[test]
    fn spec_validation() {
        assert!(BarrierSpec::new(BarrierShape::Gap { gap: 1, speed: 0, min_gap: 10.0 }, 0.0).is_err());
        assert!(BarrierSpec::exponential(BarrierShape::Gap { gap: 1, speed: 0, min_gap: 10.0 }, 1.0, -1.0).is_err());
        assert!(ClfSpec::new(0, 1.0, 1.0, 0.0).is_err());
        assert!(FilterConfig::new(-0.1, vec![]).is_err());
    }

    #[test]
    fn filter_passes_safe_reference() {
        let shape = BarrierShape::Circle { position: vec![0, 1], center: vec![1.5, 0.8], radius: 0.8 };
        let barrier = BarrierSpec::new(shape, 1.0).unwrap();
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let u_ref = DVector::from_vec(vec![-0.3, 0.2]);
        let cfg = FilterConfig::new(0.0, vec![]).unwrap();
        let out = safety_filter(&Integrator(2), &[barrier], None, &u_ref, &x, &cfg).unwrap();
        assert_eq!(out.status, QpStatus::Optimal);
        assert!((out.u.unwrap() - u_ref).amax() < 1e-12);
    }

    #[test]
    fn filter_projects_onto_single_row() {
        let barrier = BarrierSpec::new(BarrierShape::Affine { coeffs: vec![-1.0, -1.0], offset: 1.0 }, 2.0).unwrap();
        let x = DVector::from_vec(vec![0.2, 0.3]);
        let u_ref = DVector::from_vec(vec![3.0, 1.0]);
        let cfg = FilterConfig::new(0.0, vec![]).unwrap();
        let out = safety_filter(&Integrator(2), &[barrier.clone()], None, &u_ref, &x, &cfg).unwrap();
        let row = cbf_row(&Integrator(2), &barrier, &x).unwrap();
        let viol = (row.a.dot(&u_ref) - row.b).max(0.0);
        let expected = &u_ref - &row.a * (viol / row.a.norm_squared());
        assert!((out.u.unwrap() - expected).amax() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let cfg = FilterConfig::with_box(0.0, &[1.0], &[-1.0]).unwrap();
        let out = safety_filter(&Integrator(1), &[], None, &DVector::zeros(1), &DVector::zeros(1), &cfg).unwrap();
        assert_eq!(out.status, QpStatus::Infeasible);
        assert!(out.u.is_none());
        assert!(out.feasibility_margin > 0.0);
    }

    #[test]
    fn clf_slack_absorbs_conflict_with_bounds() {
        // drive x toward 5 with |u| <= 0.1: the CLF row needs slack
        let clf = ClfSpec::new(0, 5.0, 1.0, 10.0).unwrap();
        let cfg = FilterConfig::with_box(0.0, &[-0.1], &[0.1]).unwrap();
        let x = DVector::zeros(1);
        let out = safety_filter(&Integrator(1), &[], Some(&clf), &DVector::zeros(1), &x, &cfg).unwrap();
        let u = out.u.unwrap()[0];
        assert_relative_eq!(u, 0.1, epsilon = 1e-9);
        // L_g V u + eps V <= delta with V = 25, L_g V = -10
        assert!(out.slack >= -10.0 * u + 25.0 - 1e-9);
    }
}
