//! Check-loss quantile regression: full and restricted fits, the sparsity
//! (density-weighted Gram) matrix and the partitioned `Γ = D₁ D₀⁻¹ D₁`.
//!
//! The solver minimises `Σ ρ_τ(yᵢ - xᵢᵀβ)` in two phases:
//!
//! 1. Majorize–minimize on the perturbed loss `ρ_τ(r) - (ε/2) ln(ε + |r|)`.
//!    Each step is a weighted least-squares solve with weights `1/(ε + |rᵢ|)`;
//!    ε is decreased geometrically to `final_smoothing` (relative to the
//!    residual scale), warm-starting every level.
//! 2. A vertex exchange started from the `p` smallest residuals of the MM
//!    iterate. Each step moves along an edge of the check-loss polyhedron with
//!    an exact piecewise-linear line search, so the returned point is a basic
//!    solution interpolating `p` observations.
//!
//! The objective of accepted iterates never increases. Optimality is
//! certified with [`kkt_violation`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

pub const TAU_MIN: f64 = 0.01;
pub const TAU_MAX: f64 = 0.99;

/// Bandwidth used by the Powell kernel sparsity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Hall–Sheather rate in probability units, mapped to residual units
    /// through the normal quantile function and the residual IQR.
    HallSheather,
    /// Fixed half-width in residual units.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol_kkt: f64,
    pub max_iter: usize,
    pub final_smoothing: f64,
    pub max_condition: f64,
    pub bandwidth: Bandwidth,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-4,
            max_iter: 500,
            final_smoothing: 1e-8,
            max_condition: 1e10,
            bandwidth: Bandwidth::HallSheather,
        }
    }
}

/// Result of a check-loss minimisation together with the covariance objects
/// needed for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub tau: f64,
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(1/n) XᵀX`
    pub d0: DMatrix<f64>,
    /// `(1/n) Σ f̂ᵢ xᵢ xᵢᵀ`
    pub d1: DMatrix<f64>,
    /// `D₁ D₀⁻¹ D₁`
    pub gamma: DMatrix<f64>,
    /// `τ(1-τ) Γ⁻¹ / n`
    pub cov: DMatrix<f64>,
    pub objective: f64,
    /// Check-loss value of every accepted iterate.
    pub iterations: Vec<f64>,
    /// Number of leading coefficients forming the `β₁` block.
    pub p1: usize,
    pub bandwidth: f64,
    pub sparsity_degenerate: bool,
}

impl QuantileFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn p2(&self) -> usize {
        self.p() - self.p1
    }

    pub fn beta1(&self) -> DVector<f64> {
        self.beta.rows(0, self.p1).into_owned()
    }

    pub fn beta2(&self) -> DVector<f64> {
        self.beta.rows(self.p1, self.p2()).into_owned()
    }

    /// Coefficients zero-padded to length `p` (restricted fits).
    pub fn padded_beta(&self, p: usize) -> DVector<f64> {
        let mut out = DVector::zeros(p);
        out.rows_mut(0, self.beta.len()).copy_from(&self.beta);
        out
    }
}

/// Partition of `Γ` with both Schur complements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaBlocks {
    pub g11: DMatrix<f64>,
    pub g12: DMatrix<f64>,
    pub g21: DMatrix<f64>,
    pub g22: DMatrix<f64>,
    /// `Γ₂₂ - Γ₂₁ Γ₁₁⁻¹ Γ₁₂`
    pub g22_1: DMatrix<f64>,
    /// `Γ₁₁ - Γ₁₂ Γ₂₂⁻¹ Γ₂₁`
    pub g11_2: DMatrix<f64>,
}

impl GammaBlocks {
    pub fn from_matrix(gamma: &DMatrix<f64>, p1: usize) -> Result<Self> {
        let p = gamma.nrows();
        if !gamma.is_square() || p1 == 0 || p1 > p {
            return Err(Error::domain(format!(
                "cannot partition a {}x{} matrix at p1 = {p1}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if !linalg::is_symmetric(gamma, 1e-8) {
            return Err(Error::domain("Γ is not symmetric"));
        }
        let p2 = p - p1;
        let g11 = gamma.view((0, 0), (p1, p1)).into_owned();
        let g12 = gamma.view((0, p1), (p1, p2)).into_owned();
        let g21 = gamma.view((p1, 0), (p2, p1)).into_owned();
        let g22 = gamma.view((p1, p1), (p2, p2)).into_owned();
        let g11_inv = linalg::spd_inverse(&g11, "Γ₁₁")?;
        let g22_inv = linalg::spd_inverse(&g22, "Γ₂₂")?;
        let g22_1 = linalg::symmetrize(&(&g22 - &g21 * &g11_inv * &g12));
        let g11_2 = linalg::symmetrize(&(&g11 - &g12 * &g22_inv * &g21));
        if p2 > 0 && !linalg::is_positive_definite(&g22_1) {
            return Err(Error::SingularBlock("Γ₂₂.₁ is not positive definite".into()));
        }
        if !linalg::is_positive_definite(&g11_2) {
            return Err(Error::SingularBlock("Γ₁₁.₂ is not positive definite".into()));
        }
        Ok(Self { g11, g12, g21, g22, g22_1, g11_2 })
    }

    pub fn p1(&self) -> usize {
        self.g11.nrows()
    }

    pub fn p2(&self) -> usize {
        self.g22.nrows()
    }

    /// Reassembles the full `Γ`.
    pub fn gamma(&self) -> DMatrix<f64> {
        let (p1, p2) = (self.p1(), self.p2());
        let mut g = DMatrix::zeros(p1 + p2, p1 + p2);
        g.view_mut((0, 0), (p1, p1)).copy_from(&self.g11);
        g.view_mut((0, p1), (p1, p2)).copy_from(&self.g12);
        g.view_mut((p1, 0), (p2, p1)).copy_from(&self.g21);
        g.view_mut((p1, p1), (p2, p2)).copy_from(&self.g22);
        g
    }
}

/// `ρ_τ(u) = u (τ - I(u < 0))`
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

pub fn total_check_loss(residuals: &DVector<f64>, tau: f64) -> f64 {
    residuals.iter().map(|&r| check_loss(r, tau)).sum()
}

/// `ψ_τ(r) = τ - I(r < 0)`
pub fn psi(r: f64, tau: f64) -> f64 {
    if r < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

pub fn validate_tau(tau: f64) -> Result<()> {
    if !(TAU_MIN..=TAU_MAX).contains(&tau) {
        return Err(Error::domain(format!(
            "quantile level {tau} outside [{TAU_MIN}, {TAU_MAX}]"
        )));
    }
    Ok(())
}

pub fn fit_full(data: &Dataset, tau: f64) -> Result<QuantileFit> {
    fit_full_with(data, tau, &SolverOptions::default())
}

pub fn fit_full_with(data: &Dataset, tau: f64, opts: &SolverOptions) -> Result<QuantileFit> {
    fit_design(data.x(), data.y(), tau, data.p1(), opts)
}

/// Restricted fit on `X₁` only (`β₂ = 0`). The returned coefficients have
/// length `p₁`; use [`QuantileFit::padded_beta`] for the length-`p` vector.
pub fn fit_sub(data: &Dataset, tau: f64) -> Result<QuantileFit> {
    fit_sub_with(data, tau, &SolverOptions::default())
}

pub fn fit_sub_with(data: &Dataset, tau: f64, opts: &SolverOptions) -> Result<QuantileFit> {
    if data.p2() == 0 {
        return Err(Error::domain("restricted fit needs a nonempty X₂ block"));
    }
    fit_design(&data.x1(), data.y(), tau, data.p1(), opts)
}

/// Fits `y ~ x` at level `tau` and attaches `D₀`, `D₁`, `Γ` and the sandwich covariance.
pub fn fit_design(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    p1: usize,
    opts: &SolverOptions,
) -> Result<QuantileFit> {
    validate_tau(tau)?;
    let sol = solve_check_loss(x, y, tau, opts)?;
    let n = x.nrows() as f64;
    let d0 = linalg::symmetrize(&(x.transpose() * x / n));
    let sparsity = sparsity_matrix(x, &sol.residuals, tau, opts.bandwidth)?;
    let d0_inv = linalg::spd_inverse(&d0, "D₀")?;
    let gamma = linalg::symmetrize(&(&sparsity.d1 * &d0_inv * &sparsity.d1));
    let gamma_inv = linalg::spd_inverse(&gamma, "Γ")?;
    let cov = gamma_inv * (tau * (1.0 - tau) / n);
    Ok(QuantileFit {
        tau,
        beta: sol.beta,
        residuals: sol.residuals,
        d0,
        d1: sparsity.d1,
        gamma,
        cov,
        objective: sol.objective,
        iterations: sol.trace,
        p1: p1.min(x.ncols()),
        bandwidth: sparsity.bandwidth,
        sparsity_degenerate: sparsity.degenerate,
    })
}

/// Output of [`solve_check_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLossSolution {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub mm_iterations: usize,
    pub pivots: usize,
}

pub fn solve_check_loss(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    opts: &SolverOptions,
) -> Result<CheckLossSolution> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::domain("response length does not match design rows"));
    }
    if n < p || p == 0 {
        return Err(Error::SingularDesign(format!("n = {n}, p = {p}")));
    }
    let cond = linalg::condition_number(x);
    if !(cond < opts.max_condition) {
        return Err(Error::SingularDesign(format!("condition number {cond:.3e}")));
    }

    let mut beta = linalg::least_squares(x, y)?;
    let mut resid = y - x * &beta;
    let mut best_obj = total_check_loss(&resid, tau);
    let mut trace = vec![best_obj];
    let mut best = beta.clone();

    let scale = resid.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    let mut mm_iterations = 0;
    if scale > 0.0 {
        let ones_proj = x.transpose() * DVector::from_element(n, 2.0 * tau - 1.0);
        let mut eps = 0.1 * scale;
        let eps_floor = opts.final_smoothing * scale;
        'levels: loop {
            for _ in 0..50 {
                if mm_iterations >= opts.max_iter {
                    break 'levels;
                }
                mm_iterations += 1;
                let w = resid.map(|r| 1.0 / (eps + r.abs()));
                let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * w[i]);
                let lhs = linalg::symmetrize(&(xw.transpose() * x));
                let rhs = xw.transpose() * y + &ones_proj;
                let next = match lhs.clone().cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => match lhs.lu().solve(&rhs) {
                        Some(b) => b,
                        None => break 'levels,
                    },
                };
                if next.iter().any(|v| !v.is_finite()) {
                    break 'levels;
                }
                let step = (&next - &beta).amax();
                beta = next;
                resid = y - x * &beta;
                let obj = total_check_loss(&resid, tau);
                if obj <= best_obj {
                    best_obj = obj;
                    best.copy_from(&beta);
                    trace.push(obj);
                }
                if step <= 1e-12 * (1.0 + beta.amax()) {
                    break;
                }
            }
            if eps <= eps_floor {
                break;
            }
            eps = (eps * 0.1).max(eps_floor);
        }
    }

    let mut pivots = 0;
    if let Some(vertex) = vertex_exchange(x, y, tau, &best, 20 * n + 100) {
        pivots = vertex.pivots;
        let obj = total_check_loss(&(y - x * &vertex.beta), tau);
        if obj <= best_obj + 1e-12 * (1.0 + best_obj) {
            best_obj = obj.min(best_obj);
            best = vertex.beta;
            trace.push(best_obj);
        }
    }

    let residuals = y - x * &best;
    let objective = total_check_loss(&residuals, tau);
    let tol_active = default_active_tolerance(y);
    let viol = kkt_violation(x, &residuals, tau, &best, None, tol_active);
    if viol > opts.tol_kkt {
        return Err(Error::Convergence {
            iterations: mm_iterations + pivots,
            objective,
            best: best.iter().copied().collect(),
        });
    }
    Ok(CheckLossSolution { beta: best, residuals, objective, trace, mm_iterations, pivots })
}

/// Residual magnitude below which an observation counts as interpolated.
pub fn default_active_tolerance(y: &DVector<f64>) -> f64 {
    1e-7 * (1.0 + y.amax())
}

struct Vertex {
    beta: DVector<f64>,
    pivots: usize,
}

/// Greedy choice of `p` linearly independent rows, smallest `|r|` first.
fn initial_basis(x: &DMatrix<f64>, resid: &DVector<f64>) -> Option<Vec<usize>> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()));
    let mut basis = Vec::with_capacity(p);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(p);
    for i in order {
        let row = x.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for q in &ortho {
            let c = q.dot(&v);
            v -= q * c;
        }
        let vn = v.norm();
        if vn > 1e-9 * norm {
            ortho.push(v / vn);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

/// Exchange pivots between basic solutions until no edge direction descends.
fn vertex_exchange(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    start: &DVector<f64>,
    max_pivots: usize,
) -> Option<Vertex> {
    let (n, p) = x.shape();
    let resid0 = y - x * start;
    let mut basis = initial_basis(x, &resid0)?;
    let zero_tol = 1e-12 * (1.0 + y.amax());
    let mut pivots = 0;
    let mut stalled = 0;
    let mut last_obj = f64::INFINITY;
    loop {
        let xb = linalg::select_rows(x, &basis);
        let xb_inv = xb.try_inverse()?;
        let yb = linalg::select_entries(y, &basis);
        let beta = &xb_inv * yb;
        let mut resid = y - x * &beta;
        let mut is_basic = vec![false; n];
        for &b in &basis {
            is_basic[b] = true;
            resid[b] = 0.0;
        }
        let obj = total_check_loss(&resid, tau);
        if obj < last_obj - 1e-14 * (1.0 + obj.abs()) {
            stalled = 0;
        } else {
            stalled += 1;
        }
        last_obj = obj;
        if pivots >= max_pivots || stalled > 2 * p + 5 {
            return Some(Vertex { beta, pivots });
        }

        // Most negative normalised directional derivative over the 2p edges.
        let mut best: Option<(usize, f64, f64, DVector<f64>)> = None;
        for k in 0..p {
            let d = xb_inv.column(k).into_owned();
            let a = x * &d;
            let dnorm = d.norm();
            for s in [1.0, -1.0] {
                // The leaving basic point moves to r = -s t.
                let mut slope = if s < 0.0 { tau } else { 1.0 - tau };
                for i in 0..n {
                    if is_basic[i] {
                        continue;
                    }
                    let c = -s * a[i];
                    if resid[i].abs() > zero_tol {
                        slope += psi(resid[i], tau) * c;
                    } else {
                        slope += check_loss(c, tau);
                    }
                }
                if slope < -1e-12 && best.as_ref().is_none_or(|b| slope / dnorm < b.2 / b.3.norm()) {
                    best = Some((k, slope, slope, &d * s));
                }
            }
        }
        let Some((leave, mut slope, _, dir)) = best else {
            return Some(Vertex { beta, pivots });
        };

        // Exact line search along the edge: slope grows by |cᵢ| at each crossing.
        let c = -(x * &dir);
        let mut crossings: Vec<(f64, usize)> = (0..n)
            .filter(|&i| !is_basic[i] && resid[i].abs() > zero_tol && resid[i] * c[i] < 0.0)
            .map(|i| (-resid[i] / c[i], i))
            .collect();
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut entering = None;
        for (_, i) in crossings {
            slope += c[i].abs();
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let entering = entering?;
        basis[leave] = entering;
        pivots += 1;
    }
}

/// Penalty description for [`kkt_violation`].
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyKkt {
    pub lambda: f64,
    pub alpha: f64,
    /// `true` for coordinates carrying the penalty.
    pub penalized: Vec<bool>,
}

/// Largest per-coordinate violation of the subgradient optimality conditions,
/// scaled by `max(1, ‖x_j‖₁)`.
///
/// Observations with `|rᵢ| <= tol_active` contribute a free multiplier
/// `vᵢ ∈ [τ-1, τ]`; the multipliers are chosen by projected gradient to make
/// the conditions as tight as possible.
pub fn kkt_violation(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    tau: f64,
    beta: &DVector<f64>,
    penalty: Option<&PenaltyKkt>,
    tol_active: f64,
) -> f64 {
    kkt_certificate(x, residuals, tau, beta, penalty, tol_active).violation
}

/// Optimality certificate: the violation measure, the interpolated rows and
/// their multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub violation: f64,
    pub active: Vec<usize>,
    pub multipliers: DVector<f64>,
    /// `Σ xᵢ ψ(rᵢ)` over inactive rows plus `X_Aᵀ v`.
    pub gradient: DVector<f64>,
}

pub fn kkt_certificate(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    tau: f64,
    beta: &DVector<f64>,
    penalty: Option<&PenaltyKkt>,
    tol_active: f64,
) -> KktCertificate {
    let (n, p) = x.shape();
    let active: Vec<usize> = (0..n).filter(|&i| residuals[i].abs() <= tol_active).collect();
    let mut g0 = DVector::zeros(p);
    for i in 0..n {
        if residuals[i].abs() > tol_active {
            g0 += x.row(i).transpose() * psi(residuals[i], tau);
        }
    }
    let scale: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().map(|v| v.abs()).sum::<f64>().max(1.0))
        .collect();

    // Row j residual e_j(g) with g = g0 + X_Aᵀ v.
    let excess = |g: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(p, |j, _| match penalty {
            Some(pen) if pen.penalized[j] => {
                let ridge = pen.lambda * (1.0 - pen.alpha) * beta[j];
                let l1 = pen.lambda * pen.alpha;
                if beta[j] != 0.0 {
                    g[j] - ridge - l1 * beta[j].signum()
                } else {
                    let over = g[j].abs() - l1;
                    if over > 0.0 {
                        over * g[j].signum()
                    } else {
                        0.0
                    }
                }
            }
            _ => g[j],
        })
    };
    let measure = |e: &DVector<f64>| -> f64 {
        (0..p).map(|j| e[j].abs() / scale[j]).fold(0.0, f64::max)
    };

    if active.is_empty() {
        return KktCertificate {
            violation: measure(&excess(&g0)),
            active,
            multipliers: DVector::zeros(0),
            gradient: g0,
        };
    }
    let xa = linalg::select_rows(x, &active);
    let na = active.len();
    // Joint box-constrained least squares over the row multipliers and the
    // subgradients of zeroed penalized coordinates: D⁻¹(g0 + X_Aᵀv - u - t).
    let (zeroed, target, l1) = match penalty {
        Some(pen) => {
            let l1 = pen.lambda * pen.alpha;
            let zeroed: Vec<usize> = (0..p).filter(|&j| pen.penalized[j] && beta[j] == 0.0).collect();
            let target = DVector::from_fn(p, |j, _| {
                if pen.penalized[j] && beta[j] != 0.0 {
                    pen.lambda * (1.0 - pen.alpha) * beta[j] + l1 * beta[j].signum()
                } else {
                    0.0
                }
            });
            (zeroed, target, l1)
        }
        None => (Vec::new(), DVector::zeros(p), 0.0),
    };
    let k = na + zeroed.len();
    let mut mw = DMatrix::zeros(p, k);
    for j in 0..p {
        for c in 0..na {
            mw[(j, c)] = xa[(c, j)] / scale[j];
        }
    }
    for (c, &j) in zeroed.iter().enumerate() {
        mw[(j, na + c)] = -1.0 / scale[j];
    }
    let bw = DVector::from_fn(p, |j, _| (target[j] - g0[j]) / scale[j]);
    let lo = DVector::from_fn(k, |c, _| if c < na { tau - 1.0 } else { -l1 });
    let hi = DVector::from_fn(k, |c, _| if c < na { tau } else { l1 });
    let project = |z: &DVector<f64>| DVector::from_fn(k, |c, _| z[c].clamp(lo[c], hi[c]));
    let eval = |z: &DVector<f64>| -> f64 { (&mw * z - &bw).amax() };

    let svd = mw.clone().svd(true, true);
    let mut best_z = project(&svd.solve(&bw, 1e-12).unwrap_or_else(|_| DVector::zeros(k)));
    let mut best = eval(&best_z);
    if best > 1e-12 {
        let lipschitz = svd.singular_values.amax().powi(2).max(1e-300);
        let mut z = best_z.clone();
        let mut w = z.clone();
        let mut t = 1.0f64;
        for _ in 0..5000 {
            let grad = mw.transpose() * (&mw * &w - &bw);
            let next = project(&(&w - grad / lipschitz));
            let m = eval(&next);
            if m < best {
                best = m;
                best_z.copy_from(&next);
                if best <= 1e-12 {
                    break;
                }
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            w = &next + (&next - &z) * ((t - 1.0) / t_next);
            z = next;
            t = t_next;
        }
    }
    let multipliers = best_z.rows(0, na).into_owned();
    let gradient = &g0 + xa.transpose() * &multipliers;
    KktCertificate { violation: measure(&excess(&gradient)), active, multipliers, gradient }
}

/// Output of [`sparsity_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityEstimate {
    pub d1: DMatrix<f64>,
    pub bandwidth: f64,
    pub in_band: usize,
    /// Empty kernel window or a ridge repair was needed.
    pub degenerate: bool,
}

/// Hall–Sheather bandwidth in probability units.
pub fn hall_sheather(n: usize, tau: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let z = std.inverse_cdf(0.975);
    let q = std.inverse_cdf(tau);
    let dens = std.pdf(q);
    (n as f64).powf(-1.0 / 3.0)
        * z.powf(2.0 / 3.0)
        * (1.5 * dens * dens / (2.0 * q * q + 1.0)).powf(1.0 / 3.0)
}

/// Residual-scale bandwidth: `hₙ · IQR(r)`, falling back to the mean
/// absolute residual when the interquartile range vanishes, and never below
/// `1e-8`.
pub fn residual_bandwidth(residuals: &DVector<f64>, tau: f64) -> f64 {
    let h = hall_sheather(residuals.len(), tau);
    let mut sorted: Vec<f64> = residuals.iter().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut spread = linalg::quantile_sorted(&sorted, 0.75) - linalg::quantile_sorted(&sorted, 0.25);
    if !(spread > 0.0) {
        let mad = sorted.iter().map(|r| r.abs()).sum::<f64>() / sorted.len() as f64;
        spread = if mad > 0.0 { mad } else { 1e-8 };
    }
    (h * spread).max(1e-8)
}

/// Powell kernel estimate `D̂₁ = (1/n) Σ I(|rᵢ| <= h)/(2h) xᵢxᵢᵀ`, ridge-repaired
/// with `εI`, `ε = 1e-8 · trace/p`, when not positive definite.
pub fn sparsity_matrix(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    tau: f64,
    bandwidth: Bandwidth,
) -> Result<SparsityEstimate> {
    let (n, p) = x.shape();
    let h = match bandwidth {
        Bandwidth::Fixed(h) => {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
            }
            h
        }
        Bandwidth::HallSheather => residual_bandwidth(residuals, tau),
    };
    let mut d1 = DMatrix::zeros(p, p);
    let mut in_band = 0;
    for i in 0..n {
        if residuals[i].abs() <= h {
            in_band += 1;
            let xi = x.row(i);
            d1 += xi.transpose() * xi;
        }
    }
    d1 /= 2.0 * h * n as f64;
    let mut d1 = linalg::symmetrize(&d1);
    let mut degenerate = in_band == 0;
    if !linalg::is_positive_definite(&d1) {
        degenerate = true;
        let mut trace = d1.trace();
        if !(trace > 0.0) {
            trace = (x.transpose() * x).trace() / n as f64;
        }
        let mut eps = 1e-8 * trace / p as f64;
        for _ in 0..12 {
            let repaired = &d1 + DMatrix::identity(p, p) * eps;
            if linalg::is_positive_definite(&repaired) {
                d1 = repaired;
                break;
            }
            eps *= 10.0;
        }
        if !linalg::is_positive_definite(&d1) {
            return Err(Error::SingularBlock("D₁ could not be repaired".into()));
        }
    }
    Ok(SparsityEstimate { d1, bandwidth: h, in_band, degenerate })
}

/// Recomputes `D̂₁` for an existing fit; the design is `X` or `X₁` depending on
/// the length of the fitted coefficients.
pub fn estimate_sparsity(fit: &QuantileFit, data: &Dataset, bandwidth: Bandwidth) -> Result<SparsityEstimate> {
    let x = if fit.p() == data.p() { data.x().clone() } else { data.x1() };
    sparsity_matrix(&x, &fit.residuals, fit.tau, bandwidth)
}

pub fn gamma_blocks(fit: &QuantileFit) -> Result<GammaBlocks> {
    GammaBlocks::from_matrix(&fit.gamma, fit.p1)
}

/// `β̂₁^FM + Γ₁₁⁻¹ Γ₁₂ β̂₂^FM`, the linearised restricted estimator.
pub fn restricted_by_projection(full: &QuantileFit, blocks: &GammaBlocks) -> Result<DVector<f64>> {
    let g11_inv = linalg::spd_inverse(&blocks.g11, "Γ₁₁")?;
    Ok(full.beta1() + g11_inv * &blocks.g12 * full.beta2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn intercept_only(y: &[f64]) -> Dataset {
        Dataset::new(
            DVector::from_column_slice(y),
            DMatrix::from_element(y.len(), 1, 1.0),
            1,
        )
        .unwrap()
    }

    fn grid_argmin(y: &[f64], tau: f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let mut best = (lo, f64::INFINITY);
        let steps = ((hi - lo) / step).round() as usize;
        for k in 0..=steps {
            let b = lo + k as f64 * step;
            let obj: f64 = y.iter().map(|&v| check_loss(v - b, tau)).sum();
            if obj < best.1 {
                best = (b, obj);
            }
        }
        best
    }

    #[test]
    fn median_of_three() {
        let fit = fit_full(&intercept_only(&[1.0, 2.0, 3.0]), 0.5).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lower_quartile_matches_grid() {
        let y = [1.0, 2.0, 3.0, 10.0];
        let fit = fit_full(&intercept_only(&y), 0.25).unwrap();
        assert!(fit.beta[0] >= 1.0 - 1e-9 && fit.beta[0] <= 2.0 + 1e-9);
        let (_, grid_obj) = grid_argmin(&y, 0.25, 0.0, 11.0, 1e-4);
        assert!((fit.objective - grid_obj).abs() < 1e-3);
    }

    #[test]
    fn rejects_out_of_range_tau() {
        let d = intercept_only(&[1.0, 2.0, 3.0]);
        assert!(fit_full(&d, 0.005).is_err());
        assert!(fit_full(&d, 0.995).is_err());
    }

    #[test]
    fn rejects_rank_deficient_design() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let d = Dataset::new(DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), x, 1).unwrap();
        assert!(matches!(fit_full(&d, 0.5), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn schur_complement_by_hand() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = GammaBlocks::from_matrix(&g, 1).unwrap();
        assert!((b.g22_1[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((b.g11_2[(0, 0)] - 1.5).abs() < 1e-15);
        assert_eq!(b.gamma(), g);
    }

    #[test]
    fn singular_block_is_reported() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(GammaBlocks::from_matrix(&g, 1), Err(Error::SingularBlock(_))));
    }

    #[test]
    fn fixed_bandwidth_must_be_positive() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let r = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        assert!(sparsity_matrix(&x, &r, 0.5, Bandwidth::Fixed(0.0)).is_err());
        assert!(sparsity_matrix(&x, &r, 0.5, Bandwidth::Fixed(-1.0)).is_err());
    }

    #[test]
    fn empty_window_is_degenerate() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let r = DVector::from_fn(20, |i, _| if i % 2 == 0 { 100.0 } else { -100.0 });
        let est = sparsity_matrix(&x, &r, 0.5, Bandwidth::Fixed(1.0)).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.in_band, 0);
        assert!(est.d1.amax() < 1e-6);
        assert!(linalg::is_positive_definite(&est.d1));
    }

    #[test]
    fn kkt_holds_on_random_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 80;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let y = DVector::from_fn(n, |i, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            1.0 + x[(i, 1)] - 0.5 * x[(i, 2)] + e
        });
        for &tau in &[0.1, 0.25, 0.5, 0.9] {
            let sol = solve_check_loss(&x, &y, tau, &SolverOptions::default()).unwrap();
            let v = kkt_violation(&x, &sol.residuals, tau, &sol.beta, None, default_active_tolerance(&y));
            assert!(v <= 1e-4, "tau {tau}: violation {v}");
            for w in sol.trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let negative = sol.residuals.iter().filter(|&&r| r < -1e-9).count() as f64 / n as f64;
            assert!(negative >= tau - 3.0 / n as f64 && negative <= tau + 3.0 / n as f64);
        }
    }
}
