use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safebo::gp::{fit, fit_with, matern52, Dataset, FitOptions, GpPosterior, HyperparamBounds, KernelHyperparams};

/// Matérn 5/2 written out from its closed form, independent of the library.
fn kernel(a: &[f64], b: &[f64], sf2: f64, ls: &[f64]) -> f64 {
    let d = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum::<f64>().sqrt();
    let s = 5f64.sqrt() * d;
    sf2 * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Posterior mean and variance through an explicit inverse of the jittered
/// Gram matrix.
fn dense_oracle(x: &[Vec<f64>], y: &[f64], hp: &KernelHyperparams, z: &[f64]) -> (f64, f64) {
    let n = x.len();
    let sf2 = hp.signal_variance;
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel(&x[i], &x[j], sf2, &hp.lengthscales) + if i == j { hp.jitter * sf2 } else { 0.0 }
    });
    let kinv = k.try_inverse().unwrap();
    let ks = DVector::from_fn(n, |i, _| kernel(z, &x[i], sf2, &hp.lengthscales));
    let resid = DVector::from_fn(n, |i, _| y[i] - hp.constant_mean);
    let mean = hp.constant_mean + (ks.transpose() * &kinv * resid)[0];
    let var = sf2 - (ks.transpose() * &kinv * &ks)[0];
    (mean, var.max(0.0))
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen::<f64>()).collect()).collect();
    let y = x.iter().map(|r| (3.0 * r[0]).sin() + r.iter().sum::<f64>() + rng.gen_range(-0.1..0.1)).collect();
    (x, y)
}

#[test]
fn kernel_matches_closed_form() {
    let hp = KernelHyperparams::new(1.7, vec![0.4, 2.0], 0.0).unwrap();
    let (a, b) = ([0.1, 0.9], [0.7, -0.3]);
    assert!((matern52(&a, &b, &hp).unwrap() - kernel(&a, &b, 1.7, &[0.4, 2.0])).abs() < 1e-15);
    assert!((matern52(&a, &a, &hp).unwrap() - 1.7).abs() < 1e-15);
}

#[test]
fn predictions_match_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..40 {
        let n = 2 + case % 19;
        let p = 1 + case % 3;
        let (x, y) = random_problem(&mut rng, n, p);
        let ls: Vec<f64> = (0..p).map(|_| rng.gen_range(0.1..0.4)).collect();
        let mut hp = KernelHyperparams::new(rng.gen_range(0.5..2.0), ls, rng.gen_range(-1.0..1.0)).unwrap();
        // keeps the Gram matrix well conditioned so the explicit inverse is accurate
        hp.jitter = 1e-4;
        let post = GpPosterior::new(Dataset::from_rows(&x, &y).unwrap(), hp.clone()).unwrap();
        // the posterior may have escalated the jitter; the oracle uses the same value
        let used = post.hyperparams().clone();
        for _ in 0..5 {
            let z: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.2..1.2)).collect();
            let pred = post.predict(&z).unwrap();
            let (m, v) = dense_oracle(&x, &y, &used, &z);
            assert!((pred.mean - m).abs() <= 1e-10 * (1.0 + m.abs()), "case {case}: mean {} vs {m}", pred.mean);
            assert!((pred.variance - v).abs() <= 1e-10 * used.signal_variance, "case {case}: var {} vs {v}", pred.variance);
        }
    }
}

#[test]
fn prediction_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 100 {
        let p = 1 + checked % 4;
        let (x, y) = random_problem(&mut rng, 12, p);
        let post = fit(&Dataset::from_rows(&x, &y).unwrap(), &HyperparamBounds::default(), 2, checked as u64).unwrap();
        let z: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (pred, grad) = post.predict_with_gradient(&z).unwrap();
        if pred.variance < 1e-8 {
            continue;
        }
        let h = 1e-5;
        for i in 0..p {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let (a, b) = (post.predict(&zp).unwrap(), post.predict(&zm).unwrap());
            let dm = (a.mean - b.mean) / (2.0 * h);
            let ds = (a.std() - b.std()) / (2.0 * h);
            let scale_m = 1e-4 * grad.mean[i].abs().max(1e-3);
            let scale_s = 1e-4 * grad.std[i].abs().max(1e-3);
            assert!((grad.mean[i] - dm).abs() <= scale_m, "mean grad {} vs {dm}", grad.mean[i]);
            assert!((grad.std[i] - ds).abs() <= scale_s, "std grad {} vs {ds}", grad.std[i]);
        }
        checked += 1;
    }
}

#[test]
fn recovers_lengthscale_of_a_smooth_function() {
    // Varies on a scale of 0.25 in the first input and not at all in the
    // second.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|r| (4.0 * r[0]).sin()).collect();
    let post = fit(&Dataset::from_rows(&x, &y).unwrap(), &HyperparamBounds::default(), 5, 0).unwrap();
    let ls = post.lengthscales();
    assert!(ls[0] > 0.125 && ls[0] < 1.0, "relevant lengthscale {}", ls[0]);
    assert!(ls[1] > 2.0 * ls[0], "irrelevant lengthscale {} vs {}", ls[1], ls[0]);
}

#[test]
fn more_restarts_never_lower_the_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..6 {
        let (x, y) = random_problem(&mut rng, 15, 2);
        let data = Dataset::from_rows(&x, &y).unwrap();
        let few = fit_with(&data, &FitOptions { restarts: 1, seed, ..FitOptions::default() }).unwrap();
        let many = fit_with(&data, &FitOptions { restarts: 5, seed, ..FitOptions::default() }).unwrap();
        assert!(many.log_marginal_likelihood() >= few.log_marginal_likelihood() - 1e-9);
    }
}

#[test]
fn fitted_hyperparameters_respect_bounds() {
    let bounds = HyperparamBounds { lengthscale: (0.2, 0.5), signal_variance: (0.5, 2.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, y) = random_problem(&mut rng, 10, 3);
    let post = fit(&Dataset::from_rows(&x, &y).unwrap(), &bounds, 3, 1).unwrap();
    let hp = post.hyperparams();
    assert!(hp.lengthscales.iter().all(|&l| (0.2 - 1e-12..=0.5 + 1e-12).contains(&l)));
    assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&hp.signal_variance));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_stays_between_zero_and_prior(
        seed in 0u64..1000,
        z in prop::collection::vec(-1.0f64..2.0, 2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_problem(&mut rng, 8, 2);
        let hp = KernelHyperparams::new(1.3, vec![0.5, 0.8], 0.2).unwrap();
        let post = GpPosterior::new(Dataset::from_rows(&x, &y).unwrap(), hp).unwrap();
        let pred = post.predict(&z).unwrap();
        prop_assert!(pred.variance >= 0.0);
        prop_assert!(pred.variance <= 1.3 * (1.0 + 1e-12));
    }

    #[test]
    fn interpolates_training_targets(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_problem(&mut rng, 6, 2);
        let post = fit(&Dataset::from_rows(&x, &y).unwrap(), &HyperparamBounds::default(), 1, seed).unwrap();
        let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
        for (xi, yi) in x.iter().zip(&y) {
            let pred = post.predict(xi).unwrap();
            prop_assert!((pred.mean - yi).abs() <= 1e-3 * spread.max(1.0));
        }
    }
}
