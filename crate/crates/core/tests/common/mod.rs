#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qshrink::quantreg::GammaBlocks;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Monte Carlo summary of one estimator in the limiting Gaussian experiment.
pub struct LimitSummary {
    pub bias: DVector<f64>,
    pub bias_se: DVector<f64>,
    pub qb: f64,
    pub qb_se: f64,
    pub risk: f64,
    pub risk_se: f64,
}

/// Shrinkage weight applied to `FM - SM`, evaluated from scratch.
pub fn factor(name: &str, w: f64, p2: usize, critical: f64) -> f64 {
    let k = p2 as f64 - 2.0;
    match name {
        "FM" => 1.0,
        "SM" => 0.0,
        "PT" => {
            if w <= critical {
                0.0
            } else {
                1.0
            }
        }
        "S" => 1.0 - k / w,
        "PS" => (1.0 - k / w).max(0.0),
        _ => unreachable!(),
    }
}

/// Draws `Z ~ N(0, τ(1-τ)Γ⁻¹)`, forms `U = γ + Z₂`, the full-model error `Z₁`,
/// the sub-model error `Z₁ + Γ₁₁⁻¹Γ₁₂U` and the Wald statistic, then averages
/// the estimator error, its quadratic form and the quadratic bias.
pub fn limit_experiment(
    blocks: &GammaBlocks,
    tau: f64,
    weight: &DMatrix<f64>,
    gamma: &DVector<f64>,
    name: &str,
    critical: f64,
    draws: usize,
    seed: u64,
) -> LimitSummary {
    let p1 = blocks.p1();
    let p2 = blocks.p2();
    let g = blocks.gamma();
    let s = tau * (1.0 - tau);
    let cov = g.clone().try_inverse().unwrap() * s;
    let chol = cov.cholesky().unwrap().l();
    let a = blocks.g11.clone().try_inverse().unwrap() * &blocks.g12;
    let g22_1 = &blocks.g22_1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = DVector::<f64>::zeros(p1);
    let mut outer = DMatrix::<f64>::zeros(p1, p1);
    let mut loss = 0.0;
    let mut loss2 = 0.0;
    let mut e = DVector::<f64>::zeros(p1 + p2);
    for _ in 0..draws {
        for v in e.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let z = &chol * &e;
        let u = gamma + z.rows(p1, p2);
        let w = (u.transpose() * g22_1 * &u)[(0, 0)] / s;
        let f = factor(name, w, p2, critical);
        let z1 = z.rows(0, p1).into_owned();
        let sm_err = &z1 + &a * &u;
        let err = &sm_err + (&z1 - &sm_err) * f;
        let l = (err.transpose() * weight * &err)[(0, 0)];
        loss += l;
        loss2 += l * l;
        sum += &err;
        outer += &err * err.transpose();
    }
    let n = draws as f64;
    let mean = sum / n;
    let cov_err = (outer / n - &mean * mean.transpose()) * (n / (n - 1.0));
    let bias_se = DVector::from_fn(p1, |i, _| (cov_err[(i, i)] / n).sqrt());
    let g11_2 = &blocks.g11_2;
    let naive = (mean.transpose() * g11_2 * &mean)[(0, 0)];
    let cov_mean = &cov_err / n;
    let qb = naive - (g11_2 * &cov_mean).trace();
    let gc = g11_2 * &cov_mean;
    let qb_var = 4.0 * (mean.transpose() * g11_2 * &cov_mean * g11_2 * &mean)[(0, 0)] + 2.0 * (&gc * &gc).trace();
    let risk = loss / n;
    let risk_var = (loss2 / n - risk * risk) / (n - 1.0);
    LimitSummary { bias: mean, bias_se, qb, qb_se: qb_var.max(0.0).sqrt(), risk, risk_se: risk_var.sqrt() }
}

/// `Γ = [[aI, bI], [bI, cI]]` with `p₁ = p₂ = p`.
pub fn block_gamma(p: usize, a: f64, b: f64, c: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        g[(i, i)] = a;
        g[(p + i, p + i)] = c;
        g[(i, p + i)] = b;
        g[(p + i, i)] = b;
    }
    g
}

/// Random symmetric positive-definite matrix with eigenvalues in about [0.5, 3].
pub fn random_spd(p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::<f64>::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let q = m.qr().q();
    let eig = DVector::from_fn(p, |i, _| 0.5 + 2.5 * i as f64 / (p - 1).max(1) as f64);
    let g = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&g + g.transpose()) * 0.5
}
