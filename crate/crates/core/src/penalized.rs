//! Elastic-net penalized check-loss regression (ridge at `α = 0`, lasso at
//! `α = 1`) with warm-started λ paths and validation tuning.
//!
//! Objective: `Σ ρ_τ(yᵢ - xᵢᵀβ) + λ (α‖β‖₁ + (1-α)/2 ‖β‖₂²)` over the
//! penalized coordinates. An all-ones column is treated as an unpenalized
//! intercept. The loss is majorized by `(w/4) r² + (2τ-1) r/2` with
//! `w = 1/(ε + |r|)` and each surrogate is minimised by coordinate descent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantreg::{
    self, default_active_tolerance, kkt_certificate, total_check_loss, validate_tau, PenaltyKkt,
    SolverOptions,
};

/// Smallest mixing weight used when deriving `λ_max`.
pub const ALPHA_FLOOR: f64 = 0.01;
pub const DEFAULT_GRID_LEN: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    pub standardize: bool,
}

impl PenaltySpec {
    pub fn ridge() -> Self {
        Self { alpha: 0.0, lambda_grid: Vec::new(), standardize: true }
    }

    pub fn lasso() -> Self {
        Self { alpha: 1.0, lambda_grid: Vec::new(), standardize: true }
    }

    pub fn elastic_net(alpha: f64) -> Self {
        Self { alpha, lambda_grid: Vec::new(), standardize: true }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain(format!("mixing weight {} outside [0, 1]", self.alpha)));
        }
        for (k, &l) in self.lambda_grid.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::domain(format!("λ grid entry {l} is not a finite nonnegative value")));
            }
            if k > 0 && l >= self.lambda_grid[k - 1] {
                return Err(Error::domain("λ grid must be strictly decreasing"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedFit {
    pub tau: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Coefficients on the original column scale.
    pub beta: DVector<f64>,
    /// Coefficients on the fitting scale (standardized columns when requested).
    pub beta_fitted: DVector<f64>,
    /// Penalized objective on the fitting scale.
    pub objective: f64,
    pub kkt: f64,
    pub iterations: usize,
}

impl PenalizedFit {
    pub fn nonzeros(&self) -> usize {
        self.beta_fitted.iter().filter(|b| **b != 0.0).count()
    }
}

/// Column transform applied before fitting.
#[derive(Debug, Clone, PartialEq)]
struct Scaling {
    x: DMatrix<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
    intercept: Option<usize>,
    penalized: Vec<bool>,
}

impl Scaling {
    fn new(x: &DMatrix<f64>, standardize: bool) -> Self {
        let (n, p) = x.shape();
        let intercept = (0..p).find(|&j| x.column(j).iter().all(|&v| v == 1.0));
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        let mut xs = x.clone();
        if standardize {
            for j in 0..p {
                if Some(j) == intercept {
                    continue;
                }
                let col = x.column(j);
                let mean = if intercept.is_some() { col.mean() } else { 0.0 };
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                center[j] = mean;
                scale[j] = sd;
                for i in 0..n {
                    xs[(i, j)] = (x[(i, j)] - mean) / sd;
                }
            }
        }
        let penalized = (0..p).map(|j| Some(j) != intercept).collect();
        Self { x: xs, center, scale, intercept, penalized }
    }

    fn to_original(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_fn(b.len(), |j, _| b[j] / self.scale[j]);
        if let Some(k) = self.intercept {
            let shift: f64 = (0..b.len()).map(|j| out[j] * self.center[j]).sum();
            out[k] -= shift;
        }
        out
    }

    fn to_fitted(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_fn(b.len(), |j, _| b[j] * self.scale[j]);
        if let Some(k) = self.intercept {
            let shift: f64 = (0..b.len()).filter(|&j| j != k).map(|j| b[j] * self.center[j]).sum();
            out[k] += shift;
        }
        out
    }
}

fn penalty_value(beta: &DVector<f64>, penalized: &[bool], lambda: f64, alpha: f64) -> f64 {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (j, &b) in beta.iter().enumerate() {
        if penalized[j] {
            l1 += b.abs();
            l2 += b * b;
        }
    }
    lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalized objective of `beta` (fitting scale) on design `x`.
pub fn penalized_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    beta: &DVector<f64>,
    penalized: &[bool],
    lambda: f64,
    alpha: f64,
) -> f64 {
    total_check_loss(&(y - x * beta), tau) + penalty_value(beta, penalized, lambda, alpha)
}

struct Engine<'a> {
    sc: &'a Scaling,
    y: &'a DVector<f64>,
    tau: f64,
    opts: SolverOptions,
}

impl Engine<'_> {
    fn objective(&self, beta: &DVector<f64>, lambda: f64, alpha: f64) -> f64 {
        penalized_objective(&self.sc.x, self.y, self.tau, beta, &self.sc.penalized, lambda, alpha)
    }

    fn kkt(&self, beta: &DVector<f64>, lambda: f64, alpha: f64) -> f64 {
        let resid = self.y - &self.sc.x * beta;
        let pen = PenaltyKkt { lambda, alpha, penalized: self.sc.penalized.clone() };
        kkt_certificate(&self.sc.x, &resid, self.tau, beta, Some(&pen), default_active_tolerance(self.y)).violation
    }

    /// Smallest λ at which the zero solution (with unpenalized columns refit) is optimal.
    fn lambda_max(&self, alpha: f64) -> Result<(f64, DVector<f64>)> {
        let (n, p) = self.sc.x.shape();
        let free: Vec<usize> = (0..p).filter(|&j| !self.sc.penalized[j]).collect();
        let mut beta = DVector::zeros(p);
        let resid = if free.is_empty() {
            self.y.clone()
        } else {
            let xf = crate::linalg::select_columns(&self.sc.x, &free);
            let sol = quantreg::solve_check_loss(&xf, self.y, self.tau, &self.opts)?;
            for (k, &j) in free.iter().enumerate() {
                beta[j] = sol.beta[k];
            }
            sol.residuals
        };
        let tol = default_active_tolerance(self.y);
        let xf = crate::linalg::select_columns(&self.sc.x, &free);
        let cert = if free.is_empty() {
            kkt_certificate(&DMatrix::zeros(n, 0), &resid, self.tau, &DVector::zeros(0), None, tol)
        } else {
            kkt_certificate(&xf, &resid, self.tau, &DVector::zeros(free.len()), None, tol)
        };
        let mut grad = DVector::zeros(p);
        for i in 0..n {
            if resid[i].abs() > tol {
                grad += self.sc.x.row(i).transpose() * quantreg::psi(resid[i], self.tau);
            }
        }
        for (k, &i) in cert.active.iter().enumerate() {
            grad += self.sc.x.row(i).transpose() * cert.multipliers[k];
        }
        let bound = (0..p)
            .filter(|&j| self.sc.penalized[j])
            .map(|j| grad[j].abs())
            .fold(0.0, f64::max);
        Ok((bound / alpha.max(ALPHA_FLOOR), beta))
    }

    /// MM + coordinate descent from `start`; returns the best iterate found.
    fn solve(&self, start: &DVector<f64>, lambda: f64, alpha: f64) -> (DVector<f64>, f64, usize) {
        let (n, p) = self.sc.x.shape();
        let x = &self.sc.x;
        let y = self.y;
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let mut beta = start.clone();
        let mut resid = y - x * &beta;
        let mut best = beta.clone();
        let mut best_obj = self.objective(&beta, lambda, alpha);
        let scale = (resid.iter().map(|r| r.abs()).sum::<f64>() / n as f64).max(1e-12);
        let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
        let mut eps = 0.1 * scale;
        let eps_floor = self.opts.final_smoothing * scale;
        let shift = 2.0 * self.tau - 1.0;
        let mut iterations = 0;
        loop {
            let mut level_obj = f64::INFINITY;
            for _ in 0..60 {
                iterations += 1;
                let w = resid.map(|r| 1.0 / (eps + r.abs()));
                for _sweep in 0..200 {
                    let mut max_step: f64 = 0.0;
                    for j in 0..p {
                        let col = x.column(j);
                        let mut a = 0.0;
                        let mut z = 0.0;
                        for i in 0..n {
                            let xij = col[i];
                            a += w[i] * xij * xij;
                            z += xij * (w[i] * (resid[i] + xij * beta[j]) + shift);
                        }
                        a *= 0.5;
                        z *= 0.5;
                        let next = if self.sc.penalized[j] {
                            soft_threshold(z, l1) / (a + l2)
                        } else if a > 0.0 {
                            z / a
                        } else {
                            beta[j]
                        };
                        let step = next - beta[j];
                        if step != 0.0 {
                            for i in 0..n {
                                resid[i] -= col[i] * step;
                            }
                            beta[j] = next;
                        }
                        max_step = max_step.max(step.abs() * col_sq[j].sqrt());
                    }
                    if max_step <= 1e-10 * scale {
                        break;
                    }
                }
                let obj = self.objective(&beta, lambda, alpha);
                if obj <= best_obj {
                    best_obj = obj;
                    best.copy_from(&beta);
                }
                if (level_obj - obj).abs() <= 1e-12 * (1.0 + obj.abs()) {
                    break;
                }
                level_obj = obj;
            }
            if eps <= eps_floor {
                break;
            }
            eps = (eps * 0.1).max(eps_floor);
        }
        (best, best_obj, iterations)
    }

    /// Primal active-set descent on the exact objective from `start`.
    ///
    /// The working set holds interpolated rows and zeroed penalized
    /// coordinates. Each step minimises the local quadratic over the working
    /// face, moves there by an exact line search (adding the first blocking
    /// row or coordinate), and at a face minimiser drops the constraint with
    /// the worst out-of-range multiplier.
    fn active_set(&self, start: &DVector<f64>, lambda: f64, alpha: f64, max_iter: usize) -> Option<(DVector<f64>, usize)> {
        let (n, p) = self.sc.x.shape();
        let x = &self.sc.x;
        let y = self.y;
        let pen = &self.sc.penalized;
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let tau = self.tau;
        let tol_r = default_active_tolerance(y);
        let mut beta = start.clone();
        let mut resid = y - x * &beta;

        let mut in_z: Vec<bool> = (0..p).map(|j| pen[j] && beta[j] == 0.0).collect();
        let mut in_a = vec![false; n];
        {
            // Independent interpolated rows, smallest residual first.
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for j in (0..p).filter(|&j| in_z[j]) {
                let mut e = DVector::zeros(p);
                e[j] = 1.0;
                basis.push(e);
            }
            let mut order: Vec<usize> = (0..n).filter(|&i| resid[i].abs() <= tol_r).collect();
            order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()));
            for i in order {
                let mut v = x.row(i).transpose();
                let norm0 = v.norm();
                for b in &basis {
                    let c = b.dot(&v);
                    v -= b * c;
                }
                if v.norm() > 1e-9 * norm0.max(1e-300) {
                    let nv = v.norm();
                    basis.push(v / nv);
                    in_a[i] = true;
                }
            }
        }
        let mut row_side = vec![tau; n];
        let mut coord_sign = vec![0.0; p];

        for it in 0..max_iter {
            let psi_of = |i: usize, r: f64, side: &[f64]| -> f64 {
                if r.abs() <= 1e-12 * (1.0 + r.abs().max(tol_r)) {
                    side[i]
                } else {
                    quantreg::psi(r, tau)
                }
            };
            let sign_of = |j: usize, b: f64, sg: &[f64]| -> f64 { if b != 0.0 { b.signum() } else { sg[j] } };

            // Negative gradient of the local smooth model, and its curvature.
            let mut g = DVector::zeros(p);
            for i in (0..n).filter(|&i| !in_a[i]) {
                g += x.row(i).transpose() * psi_of(i, resid[i], &row_side);
            }
            let mut h = DVector::zeros(p);
            for j in 0..p {
                if pen[j] && !in_z[j] {
                    g[j] -= l1 * sign_of(j, beta[j], &coord_sign);
                    h[j] = l2;
                }
            }
            let grad = DVector::from_fn(p, |j, _| h[j] * beta[j] - g[j]);

            let rows: Vec<usize> = (0..n).filter(|&i| in_a[i]).collect();
            let zeros: Vec<usize> = (0..p).filter(|&j| in_z[j]).collect();
            let m = rows.len() + zeros.len();
            let mut c = DMatrix::zeros(m, p);
            for (k, &i) in rows.iter().enumerate() {
                c.row_mut(k).copy_from(&x.row(i));
            }
            for (k, &j) in zeros.iter().enumerate() {
                c[(rows.len() + k, j)] = 1.0;
            }
            let null = if m == 0 {
                DMatrix::identity(p, p)
            } else {
                let eig = (c.transpose() * &c).symmetric_eigen();
                let top = eig.eigenvalues.amax().max(1.0);
                let keep: Vec<usize> = (0..p).filter(|&k| eig.eigenvalues[k] <= 1e-10 * top).collect();
                linalg::select_columns(&eig.eigenvectors, &keep)
            };

            let mut dir: Option<(DVector<f64>, f64)> = None;
            if null.ncols() > 0 {
                let b = null.transpose() * &grad;
                let hm = null.transpose() * DMatrix::from_diagonal(&h) * &null;
                let eig = linalg::symmetrize(&hm).symmetric_eigen();
                let qb = eig.eigenvectors.transpose() * &b;
                let top = eig.eigenvalues.amax().max(1e-300);
                let gscale = 1e-12 * (1.0 + grad.amax());
                let flat: Vec<usize> = (0..qb.len()).filter(|&k| eig.eigenvalues[k] <= 1e-10 * top.max(l2)).collect();
                let ray: f64 = flat.iter().map(|&k| qb[k] * qb[k]).sum::<f64>().sqrt();
                let z = if ray > gscale {
                    dir = Some((DVector::zeros(0), f64::INFINITY));
                    DVector::from_fn(qb.len(), |k, _| if flat.contains(&k) { -qb[k] } else { 0.0 })
                } else {
                    DVector::from_fn(qb.len(), |k, _| if flat.contains(&k) { 0.0 } else { -qb[k] / eig.eigenvalues[k] })
                };
                let mut d = &null * (&eig.eigenvectors * z);
                for &j in &zeros {
                    d[j] = 0.0;
                }
                let limit = dir.as_ref().map_or(1.0, |v| v.1);
                if d.amax() > 1e-14 * (1.0 + beta.amax()) {
                    dir = Some((d, limit));
                } else {
                    dir = None;
                }
            }

            if let Some((d, t_max)) = dir {
                let cd = x * &d;
                let cd = DVector::from_fn(n, |i, _| if in_a[i] { 0.0 } else { cd[i] });
                let q: f64 = (0..p).filter(|&j| pen[j] && !in_z[j]).map(|j| l2 * d[j] * d[j]).sum();
                let mut slope = 0.0;
                let mut bps: Vec<(f64, f64, bool, usize)> = Vec::new();
                for i in (0..n).filter(|&i| !in_a[i] && cd[i] != 0.0) {
                    let t = resid[i] / cd[i];
                    let side = if t > 1e-14 { quantreg::psi(resid[i], tau) } else { quantreg::psi(-cd[i], tau) };
                    slope -= side * cd[i];
                    if t > 1e-14 {
                        bps.push((t, cd[i].abs(), true, i));
                    }
                }
                for j in (0..p).filter(|&j| pen[j] && !in_z[j] && d[j] != 0.0) {
                    let t = -beta[j] / d[j];
                    let s = if beta[j] != 0.0 && t > 1e-14 { beta[j].signum() } else { d[j].signum() };
                    slope += l1 * s * d[j] + l2 * beta[j] * d[j];
                    if beta[j] != 0.0 && t > 1e-14 {
                        bps.push((t, 2.0 * l1 * d[j].abs(), false, j));
                    }
                }
                if slope < -1e-13 * (1.0 + slope.abs()) {
                    bps.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut a = slope;
                    let mut step = None;
                    for &(t, jump, is_row, idx) in &bps {
                        if t > t_max {
                            break;
                        }
                        if q > 0.0 && a + q * t >= 0.0 {
                            step = Some((-a / q, None));
                            break;
                        }
                        a += jump;
                        if a + q * t >= 0.0 {
                            step = Some((t, Some((is_row, idx))));
                            break;
                        }
                    }
                    let (t, block) = match step {
                        Some(s) => s,
                        None if t_max.is_finite() => {
                            if q > 0.0 && a + q * t_max >= 0.0 { (-a / q, None) } else { (t_max, None) }
                        }
                        None if q > 0.0 => (-a / q, None),
                        None => return None,
                    };
                    beta += &d * t;
                    for i in 0..n {
                        if !in_a[i] && cd[i] != 0.0 && resid[i].abs() <= 1e-12 * (1.0 + tol_r) {
                            row_side[i] = quantreg::psi(-cd[i], tau);
                        }
                    }
                    for j in 0..p {
                        if pen[j] && beta[j] == 0.0 && d[j] != 0.0 {
                            coord_sign[j] = d[j].signum();
                        }
                    }
                    match block {
                        Some((true, i)) => in_a[i] = true,
                        Some((false, j)) => {
                            beta[j] = 0.0;
                            in_z[j] = true;
                        }
                        None => {}
                    }
                    resid = y - x * &beta;
                    for &i in rows.iter().chain(block.iter().filter(|b| b.0).map(|b| &b.1)) {
                        if resid[i].abs() <= tol_r {
                            resid[i] = 0.0;
                        }
                    }
                    continue;
                }
            }

            // Face minimiser: multipliers of the working constraints.
            if m == 0 {
                return Some((beta, it));
            }
            let w = c.transpose().svd(true, true).solve(&grad, 1e-13).ok()?;
            let mut worst: Option<(f64, bool, usize, f64)> = None;
            for (k, &i) in rows.iter().enumerate() {
                let v = w[k];
                let excess = (v - tau).max(tau - 1.0 - v);
                if excess > 1e-9 && worst.as_ref().is_none_or(|b| excess > b.0) {
                    worst = Some((excess, true, i, v));
                }
            }
            for (k, &j) in zeros.iter().enumerate() {
                let mu = w[rows.len() + k];
                let excess = (mu.abs() - l1) / (1.0 + l1);
                if excess > 1e-9 && worst.as_ref().is_none_or(|b| excess > b.0) {
                    worst = Some((excess, false, j, mu));
                }
            }
            match worst {
                None => return Some((beta, it)),
                Some((_, true, i, v)) => {
                    in_a[i] = false;
                    row_side[i] = if v > tau { tau } else { tau - 1.0 };
                }
                Some((_, false, j, mu)) => {
                    in_z[j] = false;
                    coord_sign[j] = -mu.signum();
                }
            }
        }
        None
    }
}

/// `λ_max` on the fitting scale of `spec`: the zero-solution subgradient bound,
/// using `α = 0.01` when `α < 0.01`.
pub fn lambda_max(data: &Dataset, tau: f64, alpha: f64, standardize: bool) -> Result<f64> {
    validate_tau(tau)?;
    let sc = Scaling::new(data.x(), standardize);
    let engine = Engine { sc: &sc, y: data.y(), tau, opts: SolverOptions::default() };
    Ok(engine.lambda_max(alpha)?.0)
}

/// 50 log-spaced values from `λ_max` down to `1e-4 λ_max`.
pub fn default_grid(data: &Dataset, tau: f64, alpha: f64, standardize: bool) -> Result<Vec<f64>> {
    let lmax = lambda_max(data, tau, alpha, standardize)?;
    log_grid(lmax, DEFAULT_GRID_RATIO, DEFAULT_GRID_LEN)
}

pub fn log_grid(top: f64, ratio: f64, len: usize) -> Result<Vec<f64>> {
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::domain(format!("grid top must be positive, got {top}")));
    }
    if len == 1 {
        return Ok(vec![top]);
    }
    let (a, b) = (top.ln(), (top * ratio).ln());
    Ok((0..len).map(|k| (a + (b - a) * k as f64 / (len - 1) as f64).exp()).collect())
}

pub fn fit_penalized(data: &Dataset, tau: f64, spec: &PenaltySpec, lambda: f64) -> Result<PenalizedFit> {
    let path = fit_path(data, tau, spec, &[lambda])?;
    Ok(path.into_iter().next().expect("one λ"))
}

/// Warm-started fits along `lambdas` (any order; processed as given).
pub fn fit_path(data: &Dataset, tau: f64, spec: &PenaltySpec, lambdas: &[f64]) -> Result<Vec<PenalizedFit>> {
    validate_tau(tau)?;
    spec.validate()?;
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::domain("λ must be finite and nonnegative"));
    }
    let sc = Scaling::new(data.x(), spec.standardize);
    let opts = SolverOptions::default();
    let engine = Engine { sc: &sc, y: data.y(), tau, opts };
    let alpha = spec.alpha;
    let (lmax, zero_sol) = engine.lambda_max(alpha)?;
    let exact_zero_from = if alpha > 0.0 { lmax * alpha.max(ALPHA_FLOOR) / alpha } else { f64::INFINITY };

    let mut out = Vec::with_capacity(lambdas.len());
    let mut warm = zero_sol.clone();
    for &lambda in lambdas {
        let (beta_fit, objective, kkt, iterations) = if lambda == 0.0 {
            let sol = quantreg::solve_check_loss(data.x(), data.y(), tau, &opts)?;
            let b = sc.to_fitted(&sol.beta);
            let obj = engine.objective(&b, 0.0, alpha);
            let kkt = engine.kkt(&b, 0.0, alpha);
            (b, obj, kkt, sol.mm_iterations + sol.pivots)
        } else if lambda >= exact_zero_from {
            let obj = engine.objective(&zero_sol, lambda, alpha);
            let kkt = engine.kkt(&zero_sol, lambda, alpha);
            (zero_sol.clone(), obj, kkt, 0)
        } else {
            let budget = 20 * (data.n() + data.p());
            let exact = engine.active_set(&warm, lambda, alpha, budget);
            let (mut b, mut it) = match exact {
                Some((b, it)) => (b, it),
                None => (warm.clone(), budget),
            };
            let mut kkt = engine.kkt(&b, lambda, alpha);
            if kkt > opts.tol_kkt {
                let (mm, _, mm_it) = engine.solve(&warm, lambda, alpha);
                it += mm_it;
                let (cand, extra) = engine.active_set(&mm, lambda, alpha, budget).unwrap_or((mm, budget));
                it += extra;
                let cand_kkt = engine.kkt(&cand, lambda, alpha);
                if cand_kkt < kkt {
                    (b, kkt) = (cand, cand_kkt);
                }
            }
            let obj = engine.objective(&b, lambda, alpha);
            (b, obj, kkt, it)
        };
        if kkt > opts.tol_kkt {
            return Err(Error::Convergence {
                iterations,
                objective,
                best: sc.to_original(&beta_fit).iter().copied().collect(),
            });
        }
        warm.copy_from(&beta_fit);
        out.push(PenalizedFit {
            tau,
            lambda,
            alpha,
            beta: sc.to_original(&beta_fit),
            beta_fitted: beta_fit,
            objective,
            kkt,
            iterations,
        });
    }
    Ok(out)
}

/// Mean check loss of `beta` (original scale) on `data`.
pub fn mean_check_loss(data: &Dataset, beta: &DVector<f64>, tau: f64) -> f64 {
    total_check_loss(&(data.y() - data.x() * beta), tau) / data.n() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub lambda: f64,
    pub beta: DVector<f64>,
    pub validation_loss: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// λ with the smallest mean validation check loss; ties go to the smaller λ.
/// An empty `spec.lambda_grid` is an error; use [`default_grid`] to build one.
pub fn tune(train: &Dataset, valid: &Dataset, tau: f64, spec: &PenaltySpec) -> Result<TuneResult> {
    if spec.lambda_grid.is_empty() {
        return Err(Error::domain("empty λ grid"));
    }
    if train.p() != valid.p() || train.names() != valid.names() {
        return Err(Error::Schema("training and validation columns differ".into()));
    }
    let path = fit_path(train, tau, spec, &spec.lambda_grid)?;
    let losses: Vec<f64> = path.iter().map(|f| mean_check_loss(valid, &f.beta, tau)).collect();
    let mut pick = 0;
    for k in 1..path.len() {
        let (a, b) = (losses[k], losses[pick]);
        if a < b || (a == b && path[k].lambda < path[pick].lambda) {
            pick = k;
        }
    }
    Ok(TuneResult {
        lambda: path[pick].lambda,
        beta: path[pick].beta.clone(),
        validation_loss: losses,
        lambdas: spec.lambda_grid.clone(),
    })
}

/// Tunes on the default grid for `spec.alpha` when `spec.lambda_grid` is empty.
pub fn tune_default(train: &Dataset, valid: &Dataset, tau: f64, spec: &PenaltySpec) -> Result<TuneResult> {
    if !spec.lambda_grid.is_empty() {
        return tune(train, valid, tau, spec);
    }
    let grid = default_grid(train, tau, spec.alpha, spec.standardize)?;
    tune(train, valid, tau, &spec.clone().with_grid(grid))
}
