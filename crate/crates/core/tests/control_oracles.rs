use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safebo::ctrl::{
    care_residual, care_solve, cbf_row, safety_filter, BarrierShape, BarrierSpec, CartPole, CartPoleParams, ControlAffine,
    FilterConfig,
};
use safebo::qp::QpStatus;

/// Integrates the Riccati differential equation backwards from `P = 0`
/// until it stops moving. Converges to the stabilizing solution for
/// stabilizable and detectable data.
fn riccati_flow(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let rinv = r.clone().try_inverse().unwrap();
    let s = b * &rinv * b.transpose();
    let rhs = |p: &DMatrix<f64>| a.transpose() * p + p * a - p * &s * p + q;
    let scale = 1.0 + a.norm() + s.norm() + q.norm();
    let h = 0.02 / scale;
    let mut p = DMatrix::zeros(a.nrows(), a.ncols());
    for _ in 0..2_000_000 {
        let k1 = rhs(&p);
        let k2 = rhs(&(&p + &k1 * (0.5 * h)));
        let k3 = rhs(&(&p + &k2 * (0.5 * h)));
        let k4 = rhs(&(&p + &k3 * h));
        let step = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        p += &step;
        if step.amax() <= 1e-15 * (1.0 + p.amax()) {
            break;
        }
    }
    p
}

fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

#[test]
fn double_integrator_gain() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let sol = care_solve(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)).unwrap();
    assert!((sol.k[(0, 0)] - 1.0).abs() < 1e-9);
    assert!((sol.k[(0, 1)] - 3f64.sqrt()).abs() < 1e-9);
    let p_exact = DMatrix::from_row_slice(2, 2, &[3f64.sqrt(), 1.0, 1.0, 3f64.sqrt()]);
    assert!((sol.p - p_exact).amax() < 1e-9);
}

#[test]
fn random_systems_match_riccati_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 12 {
        let n = 2 + checked % 3;
        let m = 1 + checked % 2;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.transpose() * g + DMatrix::identity(n, n) * 0.1;
        let r = DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| rng.gen_range(0.5..2.0)));
        let Ok(sol) = care_solve(&a, &b, &q, &r) else { continue };
        let oracle = riccati_flow(&a, &b, &q, &r);
        let tol = 1e-6 * (1.0 + oracle.amax());
        assert!((&sol.p - &oracle).amax() <= tol, "case {checked}: {} vs {}", sol.p, oracle);
        assert!(care_residual(&a, &b, &q, &r, &sol.p) <= 1e-8 * (1.0 + q.norm() + sol.p.norm()));
        assert!(is_hurwitz(&(&a - &b * &sol.k)));
        assert!((&sol.p - sol.p.transpose()).amax() <= 1e-10 * (1.0 + sol.p.amax()));
        checked += 1;
    }
}

#[test]
fn cart_pole_upright_lqr_matches_riccati_flow() {
    let (a, b) = CartPole::new(CartPoleParams::default()).upright_linearization();
    let q = DMatrix::identity(4, 4);
    let r = DMatrix::from_element(1, 1, 1e-2);
    let sol = care_solve(&a, &b, &q, &r).unwrap();
    let oracle = riccati_flow(&a, &b, &q, &r);
    assert!((&sol.p - &oracle).amax() <= 1e-6 * (1.0 + oracle.amax()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_care_closed_form(a in -3.0f64..3.0, b in 0.2f64..3.0, q in 0.1f64..5.0, r in 0.1f64..5.0) {
        let sol = care_solve(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, b),
            &DMatrix::from_element(1, 1, q),
            &DMatrix::from_element(1, 1, r),
        ).unwrap();
        let p = r * (a + (a * a + b * b * q / r).sqrt()) / (b * b);
        prop_assert!((sol.p[(0, 0)] - p).abs() <= 1e-9 * (1.0 + p));
        prop_assert!((sol.k[(0, 0)] - b * p / r).abs() <= 1e-9 * (1.0 + b * p / r));
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

fn circle() -> BarrierShape {
    BarrierShape::Circle { position: vec![0, 1], center: vec![0.0, 0.0], radius: 1.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filtered_input_satisfies_every_row(
        angle in 0.0f64..std::f64::consts::TAU,
        dist in 1.0f64..3.0,
        alpha in 0.1f64..10.0,
        u_ref in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let x = DVector::from_vec(vec![dist * angle.cos(), dist * angle.sin()]);
        let spec = BarrierSpec::new(circle(), alpha).unwrap();
        let cfg = FilterConfig::with_box(0.0, &[-10.0, -10.0], &[10.0, 10.0]).unwrap();
        let u_ref = DVector::from_vec(u_ref);
        let out = safety_filter(&Planar, std::slice::from_ref(&spec), None, &u_ref, &x, &cfg).unwrap();
        prop_assert_eq!(out.status, QpStatus::Optimal);
        let u = out.u.unwrap();
        let row = cbf_row(&Planar, &spec, &x).unwrap();
        prop_assert!(row.is_satisfied(&u, 1e-9));
        prop_assert!(u.iter().all(|v| v.abs() <= 10.0 + 1e-9));
        if row.is_satisfied(&u_ref, 0.0) {
            prop_assert!((&u - &u_ref).amax() <= 1e-9);
        }
    }

    #[test]
    fn ecbf_row_matches_second_derivative_along_flow(
        x in -2.5f64..2.5,
        v in -3.0f64..3.0,
        theta in -3.0f64..3.0,
        omega in -3.0f64..3.0,
        u in -50.0f64..50.0,
        alpha in 0.1f64..10.0,
        mu in 0.1f64..10.0,
    ) {
        let plant = CartPole::new(CartPoleParams::default());
        let shape = BarrierShape::PositionLimit { position: 0, velocity: 1, limit: 3.0 };
        let spec = BarrierSpec::exponential(shape.clone(), alpha, mu).unwrap();
        let state = DVector::from_vec(vec![x, v, theta, omega]);
        let input = DVector::from_element(1, u);
        let row = cbf_row(&plant, &spec, &state).unwrap();
        // h, dh/dt and d2h/dt2 along the closed-loop flow by finite differences
        let hdot = |s: &DVector<f64>| shape.gradient(s).dot(&plant.derivative(s, &input));
        let f = plant.derivative(&state, &input);
        let eps = 1e-5;
        let hddot = (hdot(&(&state + &f * eps)) - hdot(&(&state - &f * eps))) / (2.0 * eps);
        let h = shape.value(&state);
        let expected = hddot + mu * hdot(&state) + alpha * (hdot(&state) + mu * h);
        let slack = row.b - row.a.dot(&input);
        prop_assert!((slack - expected).abs() <= 1e-5 * (1.0 + expected.abs()), "{} vs {}", slack, expected);
    }
}
