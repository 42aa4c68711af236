//! Continuous algebraic Riccati equation by Newton-Kleinman iteration.

use nalgebra::{DMatrix, DVector};

use super::CtrlError;

const MAX_NEWTON_STEPS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    /// Stabilizing solution of `A'P + PA - P B R^-1 B' P + Q = 0`.
    pub p: DMatrix<f64>,
    /// Optimal gain for `u = -K x`.
    pub k: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let r_inv = r.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(r.nrows(), r.ncols(), f64::NAN));
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `M'P + PM + S = 0` through the Kronecker form.
fn lyapunov(m: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mt = m.transpose();
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs = DVector::from_column_slice((-s).as_slice());
    let vec_p = op.lu().solve(&rhs)?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Some((&p + p.transpose()) * 0.5)
}

/// Single-input pole placement by Ackermann's formula.
fn ackermann(a: &DMatrix<f64>, b: &DMatrix<f64>, poles: &[f64]) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut ctrb = DMatrix::zeros(n, n);
    let mut col = b.column(0).into_owned();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = a * col;
    }
    // desired characteristic polynomial evaluated at A
    let mut phi = DMatrix::identity(n, n);
    for &p in poles {
        phi = phi * (a - DMatrix::identity(n, n) * p);
    }
    let inv = ctrb.try_inverse()?;
    let last = inv.rows(n - 1, 1).into_owned();
    Some(last * phi)
}

/// Bass's stabilizing gain `K = B' Z^-1` with `(A + beta I) Z + Z (A + beta I)' = 2 B B'`.
fn bass(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let beta = 1.0 + a.iter().map(|v| v.abs()).sum::<f64>();
    let shifted = -(a + DMatrix::identity(n, n) * beta);
    // Z solves (-A - beta I) Z + Z (-A - beta I)' + 2 B B' = 0
    let z = lyapunov(&shifted.transpose(), &(b * b.transpose() * 2.0))?;
    Some(b.transpose() * z.try_inverse()?)
}

fn initial_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = b.ncols();
    if spectral_abscissa(a) < 0.0 {
        return Some(DMatrix::zeros(m, a.nrows()));
    }
    if m == 1 {
        let n = a.nrows();
        let scale = 1.0 + a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let poles: Vec<f64> = (1..=n).map(|i| -scale * i as f64).collect();
        if let Some(k) = ackermann(a, b, &poles) {
            if spectral_abscissa(&(a - b * &k)) < 0.0 {
                return Some(k);
            }
        }
    }
    bass(a, b).filter(|k| spectral_abscissa(&(a - b * k)) < 0.0)
}

pub fn care_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution, CtrlError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(CtrlError::InvalidArgument("inconsistent CARE dimensions".into()));
    }
    if a.iter().chain(b.iter()).chain(q.iter()).chain(r.iter()).any(|v| !v.is_finite()) {
        return Err(CtrlError::InvalidArgument("non-finite CARE data".into()));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| CtrlError::InvalidArgument("R is not positive definite".into()))?;
    let r_inv_bt = r_chol.solve(&b.transpose());
    let mut k = initial_gain(a, b).ok_or_else(|| CtrlError::NoStabilizingSolution("no stabilizing initial gain".into()))?;
    let mut p = DMatrix::zeros(n, n);
    let mut prev_step = f64::INFINITY;
    for iter in 1..=MAX_NEWTON_STEPS {
        let closed = a - b * &k;
        let cost = q + k.transpose() * r * &k;
        let next = lyapunov(&closed, &cost).ok_or_else(|| CtrlError::NoStabilizingSolution("singular Lyapunov step".into()))?;
        let step = (&next - &p).norm();
        p = next;
        k = &r_inv_bt * &p;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(CtrlError::NoStabilizingSolution("iteration diverged".into()));
        }
        let scale_p = 1.0 + p.norm();
        // quadratic convergence ends at round-off, where steps stop shrinking
        if step <= 1e-13 * scale_p || (step <= 1e-9 * scale_p && step >= prev_step) {
            let residual = care_residual(a, b, q, r, &p);
            let scale = 1.0 + q.norm() + (a.transpose() * &p).norm();
            if residual > RESIDUAL_TOL * scale {
                return Err(CtrlError::NoStabilizingSolution(format!("residual {residual:e}")));
            }
            if spectral_abscissa(&(a - b * &k)) >= 0.0 {
                return Err(CtrlError::NoStabilizingSolution("closed loop is not Hurwitz".into()));
            }
            return Ok(CareSolution { p, k, residual, iterations: iter });
        }
        prev_step = step;
    }
    Err(CtrlError::NoStabilizingSolution(format!("no convergence in {MAX_NEWTON_STEPS} steps")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn double_integrator_gain() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sol = care_solve(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(sol.k[(0, 0)], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.k[(0, 1)], 3f64.sqrt(), epsilon = 1e-9);
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn scalar_blocks() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let sol = care_solve(&(-&eye), &eye, &eye, &eye).unwrap();
        assert!((sol.p - &eye * (2f64.sqrt() - 1.0)).amax() < 1e-12);
    }

    #[test]
    fn zero_cost_on_hurwitz_system() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sol = care_solve(&a, &b, &DMatrix::zeros(2, 2), &DMatrix::identity(1, 1)).unwrap();
        assert_eq!(sol.p.amax(), 0.0);
        assert_eq!(sol.k.amax(), 0.0);
    }

    #[test]
    fn uncontrollable_unstable_mode_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            care_solve(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)),
            Err(CtrlError::NoStabilizingSolution(_))
        ));
    }

    #[test]
    fn multi_input_uses_bass_start() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -2.0, 3.0]);
        let b = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let sol = care_solve(&a, &b, &DMatrix::identity(3, 3), &DMatrix::identity(2, 2)).unwrap();
        assert!(sol.residual <= 1e-8);
        assert!(spectral_abscissa(&(&a - &b * &sol.k)) < 0.0);
    }
}
