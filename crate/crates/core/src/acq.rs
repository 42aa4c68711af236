//! Confidence-bound acquisitions and the log-barrier safe acquisition.
//!
//! The safe acquisition adds `-(1/c) ln(-bound_i)` to the lower confidence
//! bound of the objective for every constraint surrogate, where `bound_i` is a
//! pessimistic estimate of constraint `i`. Points whose bound is not strictly
//! negative get a `+inf` value.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{GpError, GpPosterior};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcqError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("gradient undefined: barrier {0} is infinite")]
    UndefinedGradient(usize),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Sign convention for the constraint confidence band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    /// `mu + beta * sigma`: an upper confidence bound on the constraint.
    #[default]
    Conservative,
    /// `mu - beta * sigma`: the lower bound, as the barrier is sometimes written.
    Optimistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub beta_objective: f64,
    pub beta_constraints: Vec<f64>,
    pub barrier_weight: f64,
    pub bound_mode: BoundMode,
}

impl AcquisitionConfig {
    /// Practical defaults: `beta_r = 2`, every constraint beta `3`, `c = 10`.
    pub fn with_defaults(q: usize) -> Self {
        Self { beta_objective: 2.0, beta_constraints: vec![3.0; q], barrier_weight: 10.0, bound_mode: BoundMode::Conservative }
    }

    pub fn validate(&self) -> Result<(), AcqError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.beta_objective) {
            return Err(AcqError::InvalidArgument(format!("beta_objective {}", self.beta_objective)));
        }
        if let Some(b) = self.beta_constraints.iter().find(|b| !positive(**b)) {
            return Err(AcqError::InvalidArgument(format!("constraint beta {b}")));
        }
        if !positive(self.barrier_weight) {
            return Err(AcqError::InvalidArgument(format!("barrier_weight {}", self.barrier_weight)));
        }
        Ok(())
    }

    pub fn num_constraints(&self) -> usize {
        self.beta_constraints.len()
    }
}

/// A log-barrier term. `value` is `+inf` exactly when `margin <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierValue {
    pub value: f64,
    pub margin: f64,
}

impl BarrierValue {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

pub fn lcb_from(mean: f64, std: f64, beta: f64) -> f64 {
    mean - beta * std
}

pub fn pessimistic_from(mean: f64, std: f64, beta: f64, mode: BoundMode) -> f64 {
    match mode {
        BoundMode::Conservative => mean + beta * std,
        BoundMode::Optimistic => mean - beta * std,
    }
}

pub fn barrier_from_bound(bound: f64, c: f64) -> BarrierValue {
    let margin = -bound;
    let value = if margin > 0.0 { -margin.ln() / c } else { f64::INFINITY };
    BarrierValue { value, margin }
}

pub fn lcb(post: &GpPosterior, z: &[f64], beta: f64) -> Result<f64, AcqError> {
    let p = post.predict(z)?;
    Ok(lcb_from(p.mean, p.std(), beta))
}

/// Confidence width `(2 ||g||^2 + 300 gamma ln^3(n / delta))^(1/2)`.
pub fn theoretical_beta(rkhs_norm: f64, gamma: f64, n: f64, delta: f64) -> Result<f64, AcqError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AcqError::InvalidArgument(format!("delta {delta} not in (0, 1)")));
    }
    if !(rkhs_norm > 0.0) || !(gamma >= 0.0) || !(n >= 1.0) {
        return Err(AcqError::InvalidArgument("need rkhs_norm > 0, gamma >= 0, n >= 1".into()));
    }
    let log_term = (n / delta).ln();
    Ok((2.0 * rkhs_norm * rkhs_norm + 300.0 * gamma * log_term.powi(3)).sqrt())
}

pub fn pessimistic_bound(post: &GpPosterior, z: &[f64], beta: f64, mode: BoundMode) -> Result<f64, AcqError> {
    let p = post.predict(z)?;
    Ok(pessimistic_from(p.mean, p.std(), beta, mode))
}

pub fn barrier(post: &GpPosterior, z: &[f64], beta: f64, c: f64, mode: BoundMode) -> Result<BarrierValue, AcqError> {
    Ok(barrier_from_bound(pessimistic_bound(post, z, beta, mode)?, c))
}

fn check_counts(posts_g: &[GpPosterior], cfg: &AcquisitionConfig) -> Result<(), AcqError> {
    if posts_g.len() != cfg.num_constraints() {
        return Err(AcqError::InvalidArgument(format!(
            "{} constraint posteriors but {} constraint betas",
            posts_g.len(),
            cfg.num_constraints()
        )));
    }
    Ok(())
}

/// Full decomposition of the safe acquisition at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sb2oBreakdown {
    pub lcb: f64,
    pub barriers: Vec<BarrierValue>,
    pub value: f64,
}

pub fn sb2o_breakdown(
    post_r: &GpPosterior,
    posts_g: &[GpPosterior],
    z: &[f64],
    cfg: &AcquisitionConfig,
) -> Result<Sb2oBreakdown, AcqError> {
    check_counts(posts_g, cfg)?;
    let lcb_value = lcb(post_r, z, cfg.beta_objective)?;
    let barriers = posts_g
        .iter()
        .zip(&cfg.beta_constraints)
        .map(|(post, &beta)| barrier(post, z, beta, cfg.barrier_weight, cfg.bound_mode))
        .collect::<Result<Vec<_>, _>>()?;
    let value = if barriers.iter().all(BarrierValue::is_finite) {
        lcb_value + barriers.iter().map(|b| b.value).sum::<f64>()
    } else {
        f64::INFINITY
    };
    Ok(Sb2oBreakdown { lcb: lcb_value, barriers, value })
}

pub fn sb2o(post_r: &GpPosterior, posts_g: &[GpPosterior], z: &[f64], cfg: &AcquisitionConfig) -> Result<f64, AcqError> {
    Ok(sb2o_breakdown(post_r, posts_g, z, cfg)?.value)
}

/// Value and analytic gradient. The value is `+inf` and the gradient `None`
/// when any barrier is infinite.
pub fn sb2o_with_gradient(
    post_r: &GpPosterior,
    posts_g: &[GpPosterior],
    z: &[f64],
    cfg: &AcquisitionConfig,
) -> Result<(f64, Option<DVector<f64>>), AcqError> {
    check_counts(posts_g, cfg)?;
    let (pr, gr) = post_r.predict_with_gradient(z)?;
    let mut value = lcb_from(pr.mean, pr.std(), cfg.beta_objective);
    let mut grad = &gr.mean - &gr.std * cfg.beta_objective;
    let sign = match cfg.bound_mode {
        BoundMode::Conservative => 1.0,
        BoundMode::Optimistic => -1.0,
    };
    for (post, &beta) in posts_g.iter().zip(&cfg.beta_constraints) {
        let (pg, gg) = post.predict_with_gradient(z)?;
        let b = barrier_from_bound(pessimistic_from(pg.mean, pg.std(), beta, cfg.bound_mode), cfg.barrier_weight);
        if !b.is_finite() {
            return Ok((f64::INFINITY, None));
        }
        value += b.value;
        // d/dz [-(1/c) ln(-bound)] = (1/c) grad(bound) / margin
        let grad_bound = &gg.mean + &gg.std * (sign * beta);
        grad += grad_bound / (cfg.barrier_weight * b.margin);
    }
    Ok((value, Some(grad)))
}

pub fn sb2o_gradient(
    post_r: &GpPosterior,
    posts_g: &[GpPosterior],
    z: &[f64],
    cfg: &AcquisitionConfig,
) -> Result<DVector<f64>, AcqError> {
    match sb2o_with_gradient(post_r, posts_g, z, cfg)? {
        (_, Some(g)) => Ok(g),
        (_, None) => {
            let b = sb2o_breakdown(post_r, posts_g, z, cfg)?;
            let idx = b.barriers.iter().position(|v| !v.is_finite()).unwrap_or(0);
            Err(AcqError::UndefinedGradient(idx))
        }
    }
}

/// Worst-case gap `q / c` between the barrier problem and the constrained
/// problem at a barrier-stationary point.
pub fn duality_gap_bound(q: usize, c: f64) -> Result<f64, AcqError> {
    if !(c > 0.0) {
        return Err(AcqError::InvalidArgument(format!("barrier weight {c}")));
    }
    Ok(q as f64 / c)
}

/// Multipliers `lambda_i = 1 / (c * margin_i)` implied by barrier stationarity.
pub fn implied_multipliers(barriers: &[BarrierValue], c: f64) -> Vec<f64> {
    barriers.iter().map(|b| 1.0 / (c * b.margin)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, KernelHyperparams};
    use approx::assert_relative_eq;

    #[test]
    fn formula_examples() {
        assert_eq!(lcb_from(2.0, 0.5, 2.0), 1.0);
        assert_eq!(lcb_from(2.0, 0.5, 0.0), 2.0);
        assert_relative_eq!(pessimistic_from(-1.0, 0.2, 2.0, BoundMode::Conservative), -0.6, epsilon = 1e-15);
        assert_relative_eq!(pessimistic_from(-1.0, 0.2, 2.0, BoundMode::Optimistic), -1.4, epsilon = 1e-15);
        assert_eq!(pessimistic_from(-1.0, 0.0, 2.0, BoundMode::Conservative), -1.0);
        assert_eq!(pessimistic_from(-1.0, 0.0, 2.0, BoundMode::Optimistic), -1.0);
    }

    #[test]
    fn barrier_examples() {
        assert_eq!(barrier_from_bound(-1.0, 7.0).value, 0.0);
        assert_relative_eq!(barrier_from_bound(-std::f64::consts::E, 1.0).value, -1.0, epsilon = 1e-15);
        assert!(barrier_from_bound(0.0, 1.0).value.is_infinite());
        assert!(barrier_from_bound(0.5, 1.0).value.is_infinite());
        let near = barrier_from_bound(-1e-300, 1.0).value;
        assert!(near.is_finite() && near > 600.0);
    }

    #[test]
    fn theoretical_beta_examples() {
        assert_relative_eq!(theoretical_beta(1.0, 0.0, 5.0, 0.1).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        let delta = 0.2;
        let n = std::f64::consts::E * delta;
        assert!(theoretical_beta(1.0, 1.0, n, delta).is_err(), "n < 1 is rejected");
        let delta = 0.5;
        let n = std::f64::consts::E * delta;
        assert_relative_eq!(theoretical_beta(1.0, 1.0, n, delta).unwrap(), 302f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(302f64.sqrt(), 17.378, epsilon = 1e-3);
        assert!(theoretical_beta(1.0, 1.0, 3.0, 1.0).is_err());
        assert!(theoretical_beta(1.0, 1.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn gap_bound() {
        assert_relative_eq!(duality_gap_bound(2, 10.0).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(duality_gap_bound(0, 3.0).unwrap(), 0.0);
        assert!(duality_gap_bound(1, 1e300).unwrap() < 1e-299);
        assert!(duality_gap_bound(1, 0.0).is_err());
    }

    fn posterior(targets: &[f64]) -> GpPosterior {
        let rows: Vec<Vec<f64>> = (0..targets.len()).map(|i| vec![i as f64 / (targets.len() - 1) as f64]).collect();
        let data = Dataset::from_rows(&rows, targets).unwrap();
        GpPosterior::new(data, KernelHyperparams::new(1.0, vec![0.4], 0.0).unwrap()).unwrap()
    }

    #[test]
    fn sb2o_without_constraints_is_lcb() {
        let post = posterior(&[0.3, -0.2, 0.5]);
        let cfg = AcquisitionConfig { beta_constraints: vec![], ..AcquisitionConfig::with_defaults(0) };
        for z in [0.1, 0.45, 0.9] {
            assert_eq!(sb2o(&post, &[], &[z], &cfg).unwrap(), lcb(&post, &[z], 2.0).unwrap());
            let g = sb2o_gradient(&post, &[], &[z], &cfg).unwrap();
            let pg = post.predict_gradient(&[z]).unwrap();
            assert_eq!(g[0], pg.mean[0] - 2.0 * pg.std[0]);
        }
    }

    #[test]
    fn infinite_barrier_has_no_gradient() {
        let post_r = posterior(&[0.3, -0.2, 0.5]);
        let post_g = posterior(&[1.0, 1.0, 1.0]);
        let cfg = AcquisitionConfig::with_defaults(1);
        assert!(sb2o(&post_r, std::slice::from_ref(&post_g), &[0.5], &cfg).unwrap().is_infinite());
        assert_eq!(
            sb2o_gradient(&post_r, std::slice::from_ref(&post_g), &[0.5], &cfg),
            Err(AcqError::UndefinedGradient(0))
        );
    }

    #[test]
    fn config_validation() {
        assert!(AcquisitionConfig::with_defaults(2).validate().is_ok());
        let mut cfg = AcquisitionConfig::with_defaults(1);
        cfg.beta_constraints[0] = 0.0;
        assert!(cfg.validate().is_err());
        cfg = AcquisitionConfig::with_defaults(1);
        cfg.barrier_weight = -1.0;
        assert!(cfg.validate().is_err());
    }
}
