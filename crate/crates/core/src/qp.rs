//! Exact solver for small dense strictly convex quadratic programs.
//!
//! Problems have the form
//!
//! ```text
//!     minimize     1/2 u' H u + f' u
//!     subject to   A u <= b
//! ```
//!
//! with `H` symmetric positive definite, at most [`MAX_VARIABLES`] variables and
//! [`MAX_CONSTRAINTS`] inequality rows. The solver enumerates every candidate
//! active set of size at most `n`, solves the equality-constrained KKT system for
//! each and keeps the primal-feasible, dual-feasible candidate with the least
//! objective. Enumeration is exhaustive, so the result does not depend on
//! iteration tolerances or starting points.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_VARIABLES: usize = 4;
pub const MAX_CONSTRAINTS: usize = 8;

/// KKT systems whose condition estimate exceeds this are skipped.
const MAX_KKT_CONDITION: f64 = 1e12;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("problem with {n} variables and {m} rows exceeds the supported {MAX_VARIABLES} x {MAX_CONSTRAINTS}")]
    TooLarge { n: usize, m: usize },
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("hessian is not positive definite (minimum eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("feasible set is nonempty but no KKT candidate was accepted")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    ineq_a: DMatrix<f64>,
    ineq_b: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        ineq_a: DMatrix<f64>,
        ineq_b: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = linear.len();
        let m = ineq_b.len();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(QpError::Dimension(format!(
                "hessian is {}x{}, expected {n}x{n}",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        if ineq_a.nrows() != m || (m > 0 && ineq_a.ncols() != n) {
            return Err(QpError::Dimension(format!(
                "constraint matrix is {}x{}, expected {m}x{n}",
                ineq_a.nrows(),
                ineq_a.ncols()
            )));
        }
        if n == 0 || n > MAX_VARIABLES || m > MAX_CONSTRAINTS {
            return Err(QpError::TooLarge { n, m });
        }
        let finite = hessian.iter().chain(linear.iter()).chain(ineq_a.iter()).chain(ineq_b.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite);
        }
        let scale = hessian.amax().max(1.0);
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(QpError::NotSymmetric(asym));
        }
        let min_eig = SymmetricEigen::new(hessian.clone()).eigenvalues.min();
        if min_eig <= 1e-10 {
            return Err(QpError::NotPositiveDefinite(min_eig));
        }
        let ineq_a = if m == 0 { DMatrix::zeros(0, n) } else { ineq_a };
        Ok(Self { hessian, linear, ineq_a, ineq_b })
    }

    pub fn num_variables(&self) -> usize {
        self.linear.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.ineq_b.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn ineq_a(&self) -> &DMatrix<f64> {
        &self.ineq_a
    }

    pub fn ineq_b(&self) -> &DVector<f64> {
        &self.ineq_b
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.hessian * u)) + self.linear.dot(u)
    }

    /// Row residuals `A u - b`; nonpositive entries are satisfied rows.
    pub fn row_residuals(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.ineq_a * u - &self.ineq_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// `None` when the problem is infeasible.
    pub primal: Option<DVector<f64>>,
    pub duals: DVector<f64>,
    pub active_set: Vec<usize>,
    pub status: QpStatus,
    pub objective: f64,
}

impl QpSolution {
    fn infeasible(m: usize) -> Self {
        Self {
            primal: None,
            duals: DVector::zeros(m),
            active_set: Vec::new(),
            status: QpStatus::Infeasible,
            objective: f64::INFINITY,
        }
    }
}

struct Candidate {
    primal: DVector<f64>,
    duals: DVector<f64>,
    active: Vec<usize>,
    objective: f64,
}

/// Solves the KKT system of `problem` with the rows in `active` held at equality.
fn solve_equality_kkt(problem: &QpProblem, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = problem.num_variables();
    let k = active.len();
    let dim = n + k;
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&problem.hessian);
    for i in 0..n {
        rhs[i] = -problem.linear[i];
    }
    for (j, &row) in active.iter().enumerate() {
        for i in 0..n {
            let a = problem.ineq_a[(row, i)];
            kkt[(n + j, i)] = a;
            kkt[(i, n + j)] = a;
        }
        rhs[n + j] = problem.ineq_b[row];
    }
    let svd = kkt.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 0.0) || smax / smin > MAX_KKT_CONDITION {
        return None;
    }
    let x = svd.solve(&rhs, 0.0).ok()?;
    let primal = x.rows(0, n).into_owned();
    let duals = x.rows(n, k).into_owned();
    Some((primal, duals))
}

pub fn solve(problem: &QpProblem) -> Result<QpSolution, QpError> {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let mut best: Option<Candidate> = None;

    for size in 0..=n.min(m) {
        for active in (0..m).combinations(size) {
            let Some((primal, multipliers)) = solve_equality_kkt(problem, &active) else {
                continue;
            };
            let dual_scale = 1.0 + problem.linear.amax();
            if multipliers.iter().any(|&l| l < -DUAL_TOL * dual_scale) {
                continue;
            }
            let residuals = problem.row_residuals(&primal);
            let primal_ok = residuals
                .iter()
                .zip(problem.ineq_b.iter())
                .all(|(&r, &b)| r <= PRIMAL_TOL * (1.0 + b.abs()));
            if !primal_ok {
                continue;
            }
            let objective = problem.objective(&primal);
            let better = match &best {
                None => true,
                Some(b) => objective < b.objective - 1e-12 * (1.0 + b.objective.abs()),
            };
            if better {
                let mut duals = DVector::zeros(m);
                for (j, &row) in active.iter().enumerate() {
                    duals[row] = multipliers[j].max(0.0);
                }
                best = Some(Candidate { primal, duals, active, objective });
            }
        }
    }

    match best {
        Some(c) => Ok(QpSolution {
            primal: Some(c.primal),
            duals: c.duals,
            active_set: c.active,
            status: QpStatus::Optimal,
            objective: c.objective,
        }),
        None => {
            if feasibility_margin(&problem.ineq_a, &problem.ineq_b) > PRIMAL_TOL {
                Ok(QpSolution::infeasible(m))
            } else {
                Err(QpError::Degenerate)
            }
        }
    }
}

/// Phase-1 value `min_u max_i (a_i' u - b_i) / |a_i|`.
///
/// Nonpositive exactly when `A u <= b` has a solution; `-inf` when the
/// normalized violations can be driven down without bound. Rows with a zero
/// normal contribute the constant `-b_i`.
pub fn feasibility_margin(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let m = b.len();
    let n = a.ncols();
    let mut constant = f64::NEG_INFINITY;
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(m);
    for i in 0..m {
        let row = a.row(i).transpose();
        let norm = row.norm();
        if norm <= 1e-14 {
            constant = constant.max(-b[i]);
        } else {
            rows.push((row / norm, b[i] / norm));
        }
    }
    if rows.is_empty() {
        return constant;
    }

    // Restrict to the row space so the epigraph LP has vertices.
    let stacked = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
    let svd = stacked.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let basis: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-12 * smax)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    let r = basis.len();
    let reduced: Vec<DVector<f64>> = rows
        .iter()
        .map(|(row, _)| DVector::from_fn(r, |j, _| row.dot(&basis[j])))
        .collect();

    // A direction that decreases every row at once makes the LP unbounded.
    let mut recession: Vec<(DVector<f64>, f64, f64)> = reduced.iter().map(|ra| (ra.clone(), -1.0, 0.0)).collect();
    for j in 0..r {
        let e = DVector::from_fn(r, |k, _| if k == j { 1.0 } else { 0.0 });
        recession.push((-&e, 0.0, 1.0));
        recession.push((e, 0.0, 1.0));
    }
    if min_t_over_vertices(&recession, r).is_some_and(|t| t < -1e-12) {
        return constant;
    }

    let epigraph: Vec<(DVector<f64>, f64, f64)> =
        reduced.iter().zip(rows.iter()).map(|(ra, (_, rb))| (ra.clone(), -1.0, *rb)).collect();
    match min_t_over_vertices(&epigraph, r) {
        Some(best) => best.max(constant),
        None => constant,
    }
}

/// Least `t` over the vertices of `{(c, t) : a_k' c + w_k t <= b_k}` in
/// `r + 1` dimensions, by enumerating every choice of `r + 1` tight rows.
fn min_t_over_vertices(rows: &[(DVector<f64>, f64, f64)], r: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for subset in (0..rows.len()).combinations(r + 1) {
        let mut lhs = DMatrix::zeros(r + 1, r + 1);
        let mut rhs = DVector::zeros(r + 1);
        for (k, &i) in subset.iter().enumerate() {
            for j in 0..r {
                lhs[(k, j)] = rows[i].0[j];
            }
            lhs[(k, r)] = rows[i].1;
            rhs[k] = rows[i].2;
        }
        let Some(sol) = lhs.lu().solve(&rhs) else { continue };
        if !sol.iter().all(|v| v.is_finite()) {
            continue;
        }
        let c = sol.rows(0, r);
        let t = sol[r];
        let feasible = rows.iter().all(|(a, w, b)| a.dot(&c) + w * t - b <= 1e-10 * (1.0 + t.abs() + b.abs()));
        if feasible && best.map_or(true, |v| t < v) {
            best = Some(t);
        }
    }
    best
}

/// Largest violation among stationarity, primal feasibility, dual sign and
/// complementary slackness. Infinite for non-optimal solutions.
pub fn kkt_residual(problem: &QpProblem, solution: &QpSolution) -> f64 {
    let Some(u) = solution.primal.as_ref().filter(|_| solution.status == QpStatus::Optimal) else {
        return f64::INFINITY;
    };
    let lambda = &solution.duals;
    let stationarity = (&problem.hessian * u + &problem.linear + problem.ineq_a.transpose() * lambda).amax();
    let residuals = problem.row_residuals(u);
    let primal = residuals.iter().fold(0.0_f64, |acc, &r| acc.max(r));
    let dual = lambda.iter().fold(0.0_f64, |acc, &l| acc.max(-l));
    let complementarity = residuals
        .iter()
        .zip(lambda.iter())
        .fold(0.0_f64, |acc, (&r, &l)| acc.max((r * l).abs()));
    stationarity.max(primal).max(dual).max(complementarity)
}
