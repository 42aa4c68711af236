//! Noise-free Gaussian-process regression with a constant mean and an
//! anisotropic Matérn 5/2 kernel.
//!
//! Inputs live in the unit box `[0, 1]^p`. [`fit`] standardizes targets to zero
//! mean and unit variance and maximizes the exact log marginal likelihood over
//! log-lengthscales and log-signal-variance; the constant mean is profiled out
//! in closed form. Predictions are always reported in the original target
//! units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{minimize_in_box, DescentOptions};

const SQRT5: f64 = 2.236_067_977_499_79;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("kernel matrix is ill-conditioned even with maximal jitter")]
    IllConditioned,
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

/// Configurations in normalized coordinates with one scalar observation each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self, GpError> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(GpError::InsufficientData { needed: 1, got: 0 });
        }
        if targets.len() != n {
            return Err(GpError::Dimension { expected: n, got: targets.len() });
        }
        if inputs.ncols() == 0 {
            return Err(GpError::InvalidDataset("inputs have zero columns".into()));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(GpError::InvalidDataset("non-finite value".into()));
        }
        if inputs.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            return Err(GpError::InvalidDataset("input outside the unit box".into()));
        }
        for i in 0..n {
            for j in 0..i {
                let d = (inputs.row(i) - inputs.row(j)).amax();
                if d <= 1e-12 {
                    return Err(GpError::InvalidDataset(format!("rows {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self, GpError> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(GpError::Dimension { expected: p, got: bad.len() });
        }
        let inputs = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(inputs, DVector::from_column_slice(targets))
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }
}

/// Kernel and mean parameters.
///
/// `jitter` is relative: the factorized matrix is `K + jitter * signal_variance * I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub constant_mean: f64,
    pub jitter: f64,
}

impl KernelHyperparams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, constant_mean: f64) -> Result<Self, GpError> {
        let hp = Self { signal_variance, lengthscales, constant_mean, jitter: JITTER_START };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(GpError::InvalidHyperparams(format!("signal variance {}", self.signal_variance)));
        }
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(GpError::InvalidHyperparams("lengthscales must be positive".into()));
        }
        if !self.constant_mean.is_finite() {
            return Err(GpError::InvalidHyperparams("non-finite constant mean".into()));
        }
        if !(1e-12..=JITTER_MAX).contains(&self.jitter) {
            return Err(GpError::InvalidHyperparams(format!("jitter {} outside [1e-12, 1e-4]", self.jitter)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

#[inline]
fn matern_profile(scaled_dist: f64) -> f64 {
    let s = SQRT5 * scaled_dist;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// `-(1/d) dk/dd / sf2`, finite at zero distance.
#[inline]
fn matern_slope(scaled_dist: f64) -> f64 {
    let s = SQRT5 * scaled_dist;
    5.0 / 3.0 * (1.0 + s) * (-s).exp()
}

#[inline]
fn scaled_distance(a: &[f64], b: &[f64], inv_ls: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_ls)
        .map(|((x, y), w)| {
            let d = (x - y) * w;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Matérn 5/2 covariance `sf2 (1 + √5 d + 5d²/3) exp(-√5 d)` with
/// lengthscale-weighted distance `d`.
pub fn matern52(z1: &[f64], z2: &[f64], hp: &KernelHyperparams) -> Result<f64, GpError> {
    let p = hp.dim();
    for z in [z1, z2] {
        if z.len() != p {
            return Err(GpError::Dimension { expected: p, got: z.len() });
        }
    }
    let inv_ls: Vec<f64> = hp.lengthscales.iter().map(|l| 1.0 / l).collect();
    Ok(hp.signal_variance * matern_profile(scaled_distance(z1, z2, &inv_ls)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGradient {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

/// Affine map between original and standardized target units.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Standardization {
    shift: f64,
    scale: f64,
}

impl Standardization {
    const IDENTITY: Self = Self { shift: 0.0, scale: 1.0 };

    fn from_targets(y: &DVector<f64>) -> Self {
        let n = y.len() as f64;
        let mean = y.mean();
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let scale = if std > 1e-12 * (1.0 + mean.abs()) { std } else { 1.0 };
        Self { shift: mean, scale }
    }
}

/// Fitted surrogate. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    dataset: Dataset,
    /// In standardized target units.
    hyperparams: KernelHyperparams,
    chol: DMatrix<f64>,
    weights: DVector<f64>,
    standardization: Standardization,
    rows: Vec<f64>,
    inv_ls: Vec<f64>,
}

fn row_major(inputs: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = inputs.shape();
    let mut out = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            out.push(inputs[(i, j)]);
        }
    }
    out
}

/// Unit-variance correlation matrix of the rows.
fn correlation_matrix(rows: &[f64], p: usize, inv_ls: &[f64]) -> DMatrix<f64> {
    let n = rows.len() / p;
    let mut c = DMatrix::identity(n, n);
    for i in 0..n {
        let ri = &rows[i * p..(i + 1) * p];
        for j in 0..i {
            let v = matern_profile(scaled_distance(ri, &rows[j * p..(j + 1) * p], inv_ls));
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Factorizes `sf2 (C + jitter I)`, escalating the jitter tenfold on failure.
fn factorize(corr: &DMatrix<f64>, sf2: f64, start_jitter: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let n = corr.nrows();
    let mut jitter = start_jitter.clamp(JITTER_START, JITTER_MAX);
    loop {
        let mut k = corr * sf2;
        for i in 0..n {
            k[(i, i)] += jitter * sf2;
        }
        if let Some(ch) = Cholesky::new(k) {
            return Some((ch, jitter));
        }
        if jitter >= JITTER_MAX {
            return None;
        }
        jitter = (jitter * 10.0).min(JITTER_MAX);
    }
}

impl GpPosterior {
    /// Conditions a GP with the given hyperparameters on `dataset` in the
    /// original target units.
    pub fn new(dataset: Dataset, hyperparams: KernelHyperparams) -> Result<Self, GpError> {
        Self::build(dataset, hyperparams, Standardization::IDENTITY)
    }

    fn build(dataset: Dataset, mut hp: KernelHyperparams, st: Standardization) -> Result<Self, GpError> {
        hp.validate()?;
        let p = dataset.dim();
        if hp.dim() != p {
            return Err(GpError::Dimension { expected: p, got: hp.dim() });
        }
        let rows = row_major(dataset.inputs());
        let inv_ls: Vec<f64> = hp.lengthscales.iter().map(|l| 1.0 / l).collect();
        let corr = correlation_matrix(&rows, p, &inv_ls);
        let (chol, jitter) = factorize(&corr, hp.signal_variance, hp.jitter).ok_or(GpError::IllConditioned)?;
        hp.jitter = jitter;
        let centered = dataset.targets().map(|y| (y - st.shift) / st.scale - hp.constant_mean);
        let weights = chol.solve(&centered);
        Ok(Self { dataset, hyperparams: hp, chol: chol.l(), weights, standardization: st, rows, inv_ls })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Hyperparameters in standardized target units.
    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyperparams
    }

    /// Lower Cholesky factor of `K + jitter * sf2 * I` in standardized units.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `K^-1 (y - m)` in standardized units.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    /// Constant prior mean in original units.
    pub fn constant_mean(&self) -> f64 {
        self.standardization.shift + self.standardization.scale * self.hyperparams.constant_mean
    }

    /// Prior variance `k(z, z)` in original units.
    pub fn signal_variance(&self) -> f64 {
        self.standardization.scale.powi(2) * self.hyperparams.signal_variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.hyperparams.lengthscales
    }

    /// Exact log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.dataset.len() as f64;
        let centered = self
            .dataset
            .targets()
            .map(|y| (y - self.standardization.shift) / self.standardization.scale - self.hyperparams.constant_mean);
        let log_det: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * centered.dot(&self.weights) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    fn check_dim(&self, z: &[f64]) -> Result<(), GpError> {
        if z.len() != self.dim() {
            return Err(GpError::Dimension { expected: self.dim(), got: z.len() });
        }
        Ok(())
    }

    fn cross_covariance(&self, z: &[f64]) -> DVector<f64> {
        let p = self.dim();
        let sf2 = self.hyperparams.signal_variance;
        DVector::from_fn(self.dataset.len(), |j, _| {
            sf2 * matern_profile(scaled_distance(z, &self.rows[j * p..(j + 1) * p], &self.inv_ls))
        })
    }

    /// Predictive mean and variance at `z`, variance clamped at zero.
    pub fn predict(&self, z: &[f64]) -> Result<Prediction, GpError> {
        self.check_dim(z)?;
        let k = self.cross_covariance(z);
        Ok(self.predict_from_cross(&k))
    }

    fn predict_from_cross(&self, k: &DVector<f64>) -> Prediction {
        let hp = &self.hyperparams;
        let mean_std = hp.constant_mean + k.dot(&self.weights);
        let v = self.chol.solve_lower_triangular(k).expect("factor has a positive diagonal");
        let var_std = (hp.signal_variance - v.norm_squared()).max(0.0);
        let st = self.standardization;
        Prediction { mean: st.shift + st.scale * mean_std, variance: st.scale * st.scale * var_std }
    }

    /// Gradients of the predictive mean and standard deviation.
    ///
    /// The standard-deviation gradient is zero where the variance is at most
    /// `1e-12`.
    pub fn predict_gradient(&self, z: &[f64]) -> Result<PredictionGradient, GpError> {
        Ok(self.predict_with_gradient(z)?.1)
    }

    pub fn predict_with_gradient(&self, z: &[f64]) -> Result<(Prediction, PredictionGradient), GpError> {
        self.check_dim(z)?;
        let n = self.dataset.len();
        let p = self.dim();
        let sf2 = self.hyperparams.signal_variance;
        let mut k = DVector::zeros(n);
        // Jacobian of k(z, x_j) w.r.t. z, one row per training point.
        let mut jac = DMatrix::zeros(n, p);
        for j in 0..n {
            let row = &self.rows[j * p..(j + 1) * p];
            let d = scaled_distance(z, row, &self.inv_ls);
            k[j] = sf2 * matern_profile(d);
            let slope = -sf2 * matern_slope(d);
            for i in 0..p {
                jac[(j, i)] = slope * (z[i] - row[i]) * self.inv_ls[i] * self.inv_ls[i];
            }
        }
        let pred = self.predict_from_cross(&k);
        let st = self.standardization;
        let grad_mean = jac.tr_mul(&self.weights) * st.scale;
        let grad_std = if pred.variance > 1e-12 {
            let v = self.chol.solve_lower_triangular(&k).expect("positive diagonal");
            let kinv_k = self.chol.tr_solve_lower_triangular(&v).expect("positive diagonal");
            let grad_var_std = jac.tr_mul(&kinv_k) * -2.0;
            let std_std = pred.std() / st.scale;
            grad_var_std * (st.scale / (2.0 * std_std))
        } else {
            DVector::zeros(p)
        };
        Ok((pred, PredictionGradient { mean: grad_mean, std: grad_std }))
    }
}

/// Search box for the fitted hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
}

impl Default for HyperparamBounds {
    fn default() -> Self {
        Self { lengthscale: (1e-2, 10.0), signal_variance: (1e-4, 1e4) }
    }
}

impl HyperparamBounds {
    fn validate(&self) -> Result<(), GpError> {
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !ok(self.lengthscale) || !ok(self.signal_variance) {
            return Err(GpError::InvalidHyperparams("empty or nonpositive hyperparameter box".into()));
        }
        Ok(())
    }

    fn log_box(&self, p: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.signal_variance.0.ln()];
        let mut hi = vec![self.signal_variance.1.ln()];
        lo.extend(std::iter::repeat(self.lengthscale.0.ln()).take(p));
        hi.extend(std::iter::repeat(self.lengthscale.1.ln()).take(p));
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub bounds: HyperparamBounds,
    pub restarts: usize,
    pub seed: u64,
    /// Replaces the default first start when present.
    pub warm_start: Option<KernelHyperparams>,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bounds: HyperparamBounds::default(), restarts: 3, seed: 0, warm_start: None, max_iters: 100 }
    }
}

/// Negative profiled log marginal likelihood and its gradient in
/// `[log sf2, log l_1, ..., log l_p]`, plus the profiled mean and jitter.
struct LikelihoodEval {
    neg_lml: f64,
    grad: Vec<f64>,
    mean: f64,
    jitter: f64,
}

fn profiled_likelihood(rows: &[f64], p: usize, y: &DVector<f64>, theta: &[f64]) -> Option<LikelihoodEval> {
    let n = y.len();
    let sf2 = theta[0].exp();
    let inv_ls: Vec<f64> = theta[1..].iter().map(|t| (-t).exp()).collect();
    let corr = correlation_matrix(rows, p, &inv_ls);
    let (chol, jitter) = factorize(&corr, sf2, JITTER_START)?;
    let ones = DVector::from_element(n, 1.0);
    let kinv_one = chol.solve(&ones);
    let mean = kinv_one.dot(y) / kinv_one.sum();
    let centered = y.map(|v| v - mean);
    let alpha = chol.solve(&centered);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let lml = -0.5 * centered.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = alpha alpha' - K^-1; d lml / d theta = 1/2 tr(W dK/dtheta).
    let kinv = chol.inverse();
    let mut grad = vec![0.0; p + 1];
    for i in 0..n {
        let ri = &rows[i * p..(i + 1) * p];
        let w_ii = alpha[i] * alpha[i] - kinv[(i, i)];
        grad[0] += 0.5 * w_ii * sf2 * (1.0 + jitter);
        for j in 0..i {
            let rj = &rows[j * p..(j + 1) * p];
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let d = scaled_distance(ri, rj, &inv_ls);
            // off-diagonal pairs appear twice in the trace
            grad[0] += w * sf2 * corr[(i, j)];
            let slope = sf2 * matern_slope(d);
            for (l, &w_l) in inv_ls.iter().enumerate() {
                let delta = (ri[l] - rj[l]) * w_l;
                grad[l + 1] += w * slope * delta * delta;
            }
        }
    }
    if !lml.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some(LikelihoodEval { neg_lml: -lml, grad: grad.into_iter().map(|g| -g).collect(), mean, jitter })
}

/// Fits hyperparameters by multi-restart local ascent of the log marginal
/// likelihood. Deterministic given `seed`.
pub fn fit(dataset: &Dataset, bounds: &HyperparamBounds, restarts: usize, seed: u64) -> Result<GpPosterior, GpError> {
    fit_with(dataset, &FitOptions { bounds: bounds.clone(), restarts, seed, ..FitOptions::default() })
}

pub fn fit_with(dataset: &Dataset, options: &FitOptions) -> Result<GpPosterior, GpError> {
    if dataset.len() < 2 {
        return Err(GpError::InsufficientData { needed: 2, got: dataset.len() });
    }
    options.bounds.validate()?;
    let p = dataset.dim();
    let st = Standardization::from_targets(dataset.targets());
    let y = dataset.targets().map(|v| (v - st.shift) / st.scale);
    let rows = row_major(dataset.inputs());
    let (lo, hi) = options.bounds.log_box(p);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let first: Vec<f64> = match &options.warm_start {
        Some(hp) if hp.dim() == p => std::iter::once(hp.signal_variance.ln())
            .chain(hp.lengthscales.iter().map(|l| l.ln()))
            .collect(),
        _ => std::iter::once(0.0).chain(std::iter::repeat(0.3_f64.ln()).take(p)).collect(),
    };
    let mut starts = vec![first.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect::<Vec<_>>()];
    for _ in 1..options.restarts.max(1) {
        starts.push(lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..=*h)).collect());
    }

    let descent = DescentOptions { max_iters: options.max_iters, grad_tol: 1e-5, initial_step: 0.5, armijo: 1e-4 };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let result = minimize_in_box(
            |theta| match profiled_likelihood(&rows, p, &y, theta) {
                Some(e) => (e.neg_lml, Some(e.grad)),
                None => (f64::INFINITY, None),
            },
            start,
            &lo,
            &hi,
            &descent,
        );
        if result.value.is_finite() && best.as_ref().map_or(true, |(v, _)| result.value < *v) {
            best = Some((result.value, result.x));
        }
    }
    let (_, theta) = best.ok_or(GpError::IllConditioned)?;
    let eval = profiled_likelihood(&rows, p, &y, &theta).ok_or(GpError::IllConditioned)?;
    let hp = KernelHyperparams {
        signal_variance: theta[0].exp(),
        lengthscales: theta[1..].iter().map(|t| t.exp()).collect(),
        constant_mean: eval.mean,
        jitter: eval.jitter,
    };
    GpPosterior::build(dataset.clone(), hp, st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hp(sf2: f64, ls: &[f64], mean: f64) -> KernelHyperparams {
        KernelHyperparams::new(sf2, ls.to_vec(), mean).unwrap()
    }

    #[test]
    fn kernel_at_zero_distance_is_signal_variance() {
        assert_eq!(matern52(&[0.3, 0.1], &[0.3, 0.1], &hp(1.0, &[0.5, 2.0], 0.0)).unwrap(), 1.0);
        assert_eq!(matern52(&[0.7], &[0.7], &hp(2.0, &[0.1], 0.0)).unwrap(), 2.0);
    }

    #[test]
    fn kernel_is_symmetric_and_checks_dimensions() {
        let h = hp(1.3, &[0.2, 0.7], 0.0);
        let a = [0.1, 0.9];
        let b = [0.6, 0.3];
        assert_eq!(matern52(&a, &b, &h).unwrap(), matern52(&b, &a, &h).unwrap());
        assert!(matches!(matern52(&[0.1], &b, &h), Err(GpError::Dimension { .. })));
    }

    #[test]
    fn dataset_rejects_duplicates_and_out_of_box_rows() {
        assert!(Dataset::from_rows(&[vec![0.2], vec![0.2]], &[1.0, 2.0]).is_err());
        assert!(Dataset::from_rows(&[vec![1.5]], &[1.0]).is_err());
        assert!(Dataset::from_rows(&[], &[]).is_err());
        assert!(Dataset::from_rows(&[vec![0.2], vec![0.3]], &[1.0]).is_err());
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(KernelHyperparams::new(0.0, vec![1.0], 0.0).is_err());
        assert!(KernelHyperparams::new(1.0, vec![-1.0], 0.0).is_err());
        let mut h = hp(1.0, &[1.0], 0.0);
        h.jitter = 1e-2;
        assert!(h.validate().is_err());
    }

    #[test]
    fn interpolates_training_points() {
        let data = Dataset::from_rows(&[vec![0.1], vec![0.5], vec![0.8]], &[1.0, -2.0, 0.5]).unwrap();
        let post = GpPosterior::new(data, hp(1.5, &[0.3], 0.2)).unwrap();
        for (x, y) in [(0.1, 1.0), (0.5, -2.0), (0.8, 0.5)] {
            let pr = post.predict(&[x]).unwrap();
            assert!((pr.mean - y).abs() <= 1e-6 * (1.0 + y.abs()));
            assert!(pr.variance <= 1e-6 * 1.5);
        }
    }

    #[test]
    fn reverts_to_prior_far_from_data() {
        let data = Dataset::from_rows(&[vec![0.0], vec![0.05]], &[3.0, 4.0]).unwrap();
        let post = GpPosterior::new(data, hp(2.0, &[0.04], 0.5)).unwrap();
        let pr = post.predict(&[1.0]).unwrap();
        assert!((pr.mean - 0.5).abs() < 1e-6);
        assert!((pr.variance - 2.0).abs() < 1e-6);
        let g = post.predict_gradient(&[1.0]).unwrap();
        assert!(g.mean.amax() < 1e-8 && g.std.amax() < 1e-8);
    }

    #[test]
    fn symmetric_data_has_flat_mean_at_center() {
        // {(-1, 1), (1, 1)} rescaled into the unit box: x = 0.25, 0.75, query 0.5
        let data = Dataset::from_rows(&[vec![0.25], vec![0.75]], &[1.0, 1.0]).unwrap();
        let post = GpPosterior::new(data, hp(1.0, &[0.3], 0.0)).unwrap();
        let g = post.predict_gradient(&[0.5]).unwrap();
        assert!(g.mean[0].abs() < 1e-12);
    }

    #[test]
    fn constant_data_fits_constant_mean() {
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[4.2, 4.2]).unwrap();
        let post = fit(&data, &HyperparamBounds::default(), 2, 7).unwrap();
        assert_relative_eq!(post.constant_mean(), 4.2, epsilon = 1e-9);
        for z in [[0.5, 0.5], [0.1, 0.9], [0.3, 0.0]] {
            assert_relative_eq!(post.predict(&z).unwrap().mean, 4.2, epsilon = 1e-9);
        }
    }

    #[test]
    fn fit_requires_two_points() {
        let data = Dataset::from_rows(&[vec![0.5]], &[1.0]).unwrap();
        assert!(matches!(
            fit(&data, &HyperparamBounds::default(), 1, 0),
            Err(GpError::InsufficientData { .. })
        ));
    }

    #[test]
    fn likelihood_gradient_matches_finite_differences() {
        let rows = vec![0.1, 0.2, 0.4, 0.9, 0.7, 0.3, 0.95, 0.6, 0.2, 0.55];
        let y = DVector::from_vec(vec![0.3, -1.0, 0.8, 1.2, -0.4]);
        let theta = [0.3, (-1.0f64), (-0.5f64)];
        let e = profiled_likelihood(&rows, 2, &y, &theta).unwrap();
        for k in 0..3 {
            let h = 1e-6;
            let mut tp = theta;
            let mut tm = theta;
            tp[k] += h;
            tm[k] -= h;
            let fd = (profiled_likelihood(&rows, 2, &y, &tp).unwrap().neg_lml
                - profiled_likelihood(&rows, 2, &y, &tm).unwrap().neg_lml)
                / (2.0 * h);
            assert_relative_eq!(e.grad[k], fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }
}
