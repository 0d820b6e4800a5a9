use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qshrink::quantreg::{
    check_loss, default_active_tolerance, fit_design, fit_full, fit_full_with, fit_sub, gamma_blocks, kkt_violation,
    restricted_by_projection, solve_check_loss, total_check_loss, Bandwidth, SolverOptions,
};
use qshrink::{Dataset, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

// Minimum over all basic solutions through two observations.
fn enumerate_basic(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> f64 {
    let n = x.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = DMatrix::from_row_slice(2, 2, &[x[(i, 0)], x[(i, 1)], x[(j, 0)], x[(j, 1)]]);
            let Some(inv) = a.try_inverse() else { continue };
            let b = inv * DVector::from_vec(vec![y[i], y[j]]);
            let obj: f64 = (0..n).map(|k| check_loss(y[k] - x[(k, 0)] * b[0] - x[(k, 1)] * b[1], tau)).sum();
            best = best.min(obj);
        }
    }
    best
}

fn toy(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        0.5 + 2.0 * x[(i, 1)] + e
    });
    (x, y)
}

#[test]
fn bivariate_toy_matches_enumeration() {
    for seed in 0..10 {
        let (x, y) = toy(seed, 20);
        for &tau in &[0.25, 0.5, 0.75] {
            let sol = solve_check_loss(&x, &y, tau, &SolverOptions::default()).unwrap();
            let oracle = enumerate_basic(&x, &y, tau);
            assert!((sol.objective - oracle).abs() <= 1e-8 * (1.0 + oracle), "seed {seed} tau {tau}: {} vs {oracle}", sol.objective);
        }
    }
}

#[test]
fn sparsity_under_normal_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        x[(i, 1)] - x[(i, 2)] + e
    });
    let d = Dataset::new(y, x, 1).unwrap();
    let fit = fit_full(&d, 0.5).unwrap();
    let target = &fit.d0 * (1.0 / (2.0 * std::f64::consts::PI).sqrt());
    assert!((&fit.d1 - &target).amax() < 0.03, "{}", fit.d1);
    assert!(!fit.sparsity_degenerate);
}

#[test]
fn fixed_bandwidth_is_used() {
    let (x, y) = toy(9, 200);
    let opts = SolverOptions { bandwidth: Bandwidth::Fixed(0.4), ..SolverOptions::default() };
    let fit = fit_design(&x, &y, 0.5, 1, &opts).unwrap();
    assert_eq!(fit.bandwidth, 0.4);
}

#[test]
fn heavy_tailed_fit_is_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 300;
    let x = DMatrix::from_fn(n, 5, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let cauchy = rand_distr::Cauchy::new(0.0, 1.0).unwrap();
    let y = DVector::from_fn(n, |i, _| x[(i, 1)] + cauchy.sample(&mut rng));
    for &tau in &[0.05, 0.5, 0.95] {
        let sol = solve_check_loss(&x, &y, tau, &SolverOptions::default()).unwrap();
        let v = kkt_violation(&x, &sol.residuals, tau, &sol.beta, None, default_active_tolerance(&y));
        assert!(v <= 1e-4);
    }
}

#[test]
fn heteroskedastic_sparsity_is_not_proportional() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 3000;
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        x[(i, 1)] + e * (1.0f64 + x[(i, 1)] * x[(i, 1)]).sqrt()
    });
    let fit = fit_full(&Dataset::new(y, x, 1).unwrap(), 0.5).unwrap();
    // best scalar c minimising ‖D₁ - cD₀‖_F
    let c = fit.d1.dot(&fit.d0) / fit.d0.norm_squared();
    let rel = (&fit.d1 - &fit.d0 * c).norm() / fit.d1.norm();
    assert!(rel > 0.05, "{rel}");
}

#[test]
fn gamma_inverts_the_sandwich_core() {
    let (x, y) = toy(4, 150);
    let fit = fit_design(&x, &y, 0.4, 1, &SolverOptions::default()).unwrap();
    let d1_inv = fit.d1.clone().try_inverse().unwrap();
    let prod = &fit.gamma * (&d1_inv * &fit.d0 * &d1_inv);
    assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
    let s = 0.4 * 0.6;
    let cov = fit.gamma.clone().try_inverse().unwrap() * (s / 150.0);
    assert!((&cov - &fit.cov).amax() < 1e-10 * cov.amax());
    assert!((&fit.gamma - fit.gamma.transpose()).amax() < 1e-8);
}

#[test]
fn orthogonal_design_gives_diagonal_gamma() {
    // ±1 columns with exactly orthogonal sign patterns; the window covers every residual.
    let n = 64;
    let x = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => 1.0,
        _ => if (i >> (j - 1)) & 1 == 0 { 1.0 } else { -1.0 },
    });
    let y = DVector::from_fn(n, |i, _| x[(i, 1)] + ((i * 7) % 5) as f64 * 0.1);
    let opts = SolverOptions { bandwidth: Bandwidth::Fixed(100.0), ..SolverOptions::default() };
    let fit = fit_design(&x, &y, 0.5, 2, &opts).unwrap();
    let off = fit.gamma.map_with_location(|i, j, v| if i == j { 0.0 } else { v }).amax();
    assert!(off <= 1e-8 * fit.gamma.amax(), "{}", fit.gamma);
    let b = gamma_blocks(&fit).unwrap();
    assert!((&b.g22_1 - &b.g22).amax() <= 1e-8 * b.g22.amax());
    assert!((&b.g11_2 - &b.g11).amax() <= 1e-8 * b.g11.amax());
}

#[test]
fn iid_sandwich_reduces_to_scaled_design_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 2000;
    let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        2.0 * x[(i, 1)] + e
    });
    let tau = 0.5;
    let fit = fit_full(&Dataset::new(y, x, 1).unwrap(), tau).unwrap();
    let f0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let target = fit.d0.clone().try_inverse().unwrap() * (tau * (1.0 - tau) / (f0 * f0 * n as f64));
    for i in 0..3 {
        let rel = (fit.cov[(i, i)] - target[(i, i)]).abs() / target[(i, i)];
        assert!(rel < 0.15, "entry {i}: {} vs {}", fit.cov[(i, i)], target[(i, i)]);
    }
}

#[test]
fn sub_model_examples() {
    let x = DMatrix::from_fn(3, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
    let d = Dataset::new(DVector::from_vec(vec![1.0, 2.0, 3.0]), x, 1).unwrap();
    assert!((fit_sub(&d, 0.5).unwrap().beta[0] - 2.0).abs() < 1e-9);

    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(40, 4, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let y = DVector::from_fn(40, |i, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[(i, 1)] + 0.5 * x[(i, 3)] + e
        });
        let d = Dataset::new(y, x, 2).unwrap();
        let full = fit_full(&d, 0.3).unwrap();
        let sub = fit_sub(&d, 0.3).unwrap();
        assert!(sub.objective >= full.objective - 1e-8 * (1.0 + full.objective));
        assert_eq!(sub.padded_beta(4).len(), 4);
    }
}

#[test]
fn zero_candidate_columns_are_rank_deficient() {
    let x = DMatrix::from_fn(30, 3, |i, j| match j {
        0 => 1.0,
        1 => (i % 7) as f64,
        _ => 0.0,
    });
    let y = DVector::from_fn(30, |i, _| (i % 4) as f64 + 0.5 * (i % 7) as f64);
    let d = Dataset::new(y, x, 2).unwrap();
    assert!(matches!(fit_full(&d, 0.5), Err(Error::SingularDesign(_))));
    let r = qshrink::shrinkage::estimate(&d, 0.5, 0.05).unwrap();
    assert!((&r.beta_fm - &r.beta_sm).amax() < 1e-4);
    let sub = fit_sub(&d, 0.5).unwrap();
    assert!((&sub.beta - &r.beta_fm).amax() < 1e-4);
}

#[test]
fn projection_tracks_the_restricted_fit_under_the_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 4000;
    let x = DMatrix::from_fn(n, 4, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        1.0 + x[(i, 1)] + e
    });
    let d = Dataset::new(y, x, 2).unwrap();
    let full = fit_full_with(&d, 0.5, &SolverOptions::default()).unwrap();
    let sub = fit_sub(&d, 0.5).unwrap();
    let proj = restricted_by_projection(&full, &gamma_blocks(&full).unwrap()).unwrap();
    // both are √n-consistent for β₁, so they differ by O(1/√n)
    assert!((&proj - &sub.beta).amax() < 4.0 / (n as f64).sqrt(), "{proj} vs {}", sub.beta);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn scale_and_shift_equivariance(seed in 0u64..10_000, tau in 0.1f64..0.9, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 40;
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { noise.sample(&mut rng) });
        let y = DVector::from_fn(n, |i, _| x[(i, 1)] + noise.sample(&mut rng));
        let opts = SolverOptions::default();
        let base = solve_check_loss(&x, &y, tau, &opts).unwrap();
        let y2 = y.map(|v| scale * v + shift);
        let moved = solve_check_loss(&x, &y2, tau, &opts).unwrap();
        // Objectives agree exactly under the affine map even if minimisers are not unique.
        prop_assert!((moved.objective - scale * base.objective).abs() <= 1e-7 * (1.0 + moved.objective));
        let mapped = {
            let mut b = &base.beta * scale;
            b[0] += shift;
            b
        };
        let obj_mapped = total_check_loss(&(&y2 - &x * mapped), tau);
        prop_assert!((obj_mapped - moved.objective).abs() <= 1e-7 * (1.0 + moved.objective));
    }

    #[test]
    fn objective_trace_never_increases(seed in 0u64..10_000, tau in 0.05f64..0.95) {
        let (x, y) = toy(seed, 30);
        let sol = solve_check_loss(&x, &y, tau, &SolverOptions::default()).unwrap();
        for w in sol.trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let kkt = kkt_violation(&x, &sol.residuals, tau, &sol.beta, None, default_active_tolerance(&y));
        prop_assert!(kkt <= 1e-4);
    }

    #[test]
    fn negative_residual_share_brackets_tau(seed in 0u64..10_000, tau in 0.05f64..0.95, n in 20usize..80) {
        let (x, y) = toy(seed, n);
        let sol = solve_check_loss(&x, &y, tau, &SolverOptions::default()).unwrap();
        let tol = default_active_tolerance(&y);
        let neg = sol.residuals.iter().filter(|&&r| r < -tol).count() as f64 / n as f64;
        let p = 2.0 / n as f64;
        prop_assert!(neg >= tau - p - 1e-12 && neg <= tau + p + 1e-12, "share {neg}");
    }
}
