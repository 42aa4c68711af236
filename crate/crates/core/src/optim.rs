//! Box-constrained local descent shared by hyperparameter fitting and
//! acquisition maximization.

/// Options for [`minimize_in_box`].
#[derive(Debug, Clone, PartialEq)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Stop once the projected gradient `x - P(x - g)` is this small.
    pub grad_tol: f64,
    /// Length of the very first trial step.
    pub initial_step: f64,
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iters: 200, grad_tol: 1e-6, initial_step: 0.1, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            let d = xi - (xi - gi).clamp(lo, hi);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient descent with Armijo backtracking.
///
/// Trial steps start from the Barzilai-Borwein length of the previous
/// iteration. `objective` returns the value and, for finite values, the
/// gradient; infinite values are rejected by the line search, so a start with a
/// finite value never leaves the finite region.
pub fn minimize_in_box<F>(
    mut objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &DescentOptions,
) -> DescentResult
where
    F: FnMut(&[f64]) -> (f64, Option<Vec<f64>>),
{
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, grad) = objective(&x);
    let Some(mut g) = grad.filter(|_| fx.is_finite()) else {
        return DescentResult {
            projected_grad_norm: f64::INFINITY,
            gradient: vec![f64::NAN; x.len()],
            x,
            value: fx,
            iterations: 0,
            converged: false,
        };
    };

    let mut pg_norm = projected_gradient_norm(&x, &g, lower, upper);
    let mut step = options.initial_step / pg_norm.max(1e-300);
    let mut iterations = 0;
    let mut converged = pg_norm <= options.grad_tol;

    while !converged && iterations < options.max_iters {
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            project(&mut trial, lower, upper);
            let d: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if d.iter().all(|&v| v == 0.0) {
                break;
            }
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && ft <= fx + options.armijo * dot(&g, &d) {
                if let Some(gt) = gt {
                    accepted = Some((trial, ft, gt, d));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-12, 1e12) } else { 2.0 * t };
        x = xn;
        fx = fnew;
        g = gn;
        pg_norm = projected_gradient_norm(&x, &g, lower, upper);
        converged = pg_norm <= options.grad_tol;
    }

    DescentResult { x, value: fx, gradient: g, projected_grad_norm: pg_norm, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let f = |x: &[f64]| {
            let v = (x[0] - 0.3).powi(2) + 10.0 * (x[1] - 0.6).powi(2);
            (v, Some(vec![2.0 * (x[0] - 0.3), 20.0 * (x[1] - 0.6)]))
        };
        let r = minimize_in_box(f, &[0.9, 0.1], &[0.0, 0.0], &[1.0, 1.0], &DescentOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-6 && (r.x[1] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn minimum_on_the_boundary() {
        let f = |x: &[f64]| ((x[0] + 1.0).powi(2), Some(vec![2.0 * (x[0] + 1.0)]));
        let r = minimize_in_box(f, &[0.5], &[0.0], &[1.0], &DescentOptions::default());
        assert!(r.converged);
        assert_eq!(r.x[0], 0.0);
    }

    #[test]
    fn infinite_region_is_never_entered() {
        // -ln(x) + x with a wall at x <= 0.2 encoded as +inf
        let f = |x: &[f64]| {
            if x[0] <= 0.2 {
                (f64::INFINITY, None)
            } else {
                (-(x[0] - 0.2).ln() + 4.0 * x[0], Some(vec![-1.0 / (x[0] - 0.2) + 4.0]))
            }
        };
        let r = minimize_in_box(f, &[0.9], &[0.0], &[1.0], &DescentOptions::default());
        assert!(r.value.is_finite());
        assert!((r.x[0] - 0.45).abs() < 1e-6);
    }
}
