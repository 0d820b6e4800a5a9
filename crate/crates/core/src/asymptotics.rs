//! Asymptotic bias, quadratic bias and weighted quadratic risk of the five
//! estimators under local alternatives `β₂ = γ/√n`.
//!
//! In the limit the full-model error is `Z ~ N(0, τ(1-τ)Γ⁻¹)` and
//! `U = γ + Z₂`. Every estimator has the form `SM + (FM - SM)(1 - h(W))`
//! with `W = UᵀΓ₂₂.₁U/(τ(1-τ)) ~ χ²_{p₂}(Δ)`, so with `A = Γ₁₁⁻¹Γ₁₂`
//! its `β₁` error is `Z₁ + A U h(W)`. Writing `E_m[f]` for the expectation of
//! `f(X)`, `X ~ χ²_m(Δ)`:
//!
//! ```text
//! bias = δ E_{p₂+2}[h]
//! risk = τ(1-τ) tr(W Γ₁₁.₂⁻¹)
//!      + tr(WΦ) E_{p₂+2}[h² - 2h]
//!      + δᵀWδ (E_{p₂+4}[h² - 2h] + 2 E_{p₂+2}[h])
//! ```
//!
//! with `h = 0` (FM), `1` (SM), `I(X <= χ²_{p₂,α})` (PT), `(p₂-2)/X` (S) and
//! `min(1, (p₂-2)/X)` (PS). [`RiskForm::Printed`] instead evaluates the
//! longer expressions written with `Σ₂₁` and `Φ⁻¹` cross terms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantreg::GammaBlocks;
use crate::shrinkage::Estimator;
use crate::specfun::{chi2_upper_quantile, NoncentralChiSq, Side};

/// Which risk expressions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RiskForm {
    /// Expressions derived from the limiting Gaussian experiment.
    #[default]
    Derived,
    /// Term-by-term expressions with `Σ₂₁` and `δδᵀΦ⁻¹Σ₂₁` cross terms.
    Printed,
}

/// How the noncentrality is obtained from the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoncentralityForm {
    /// `γᵀΓ₂₂.₁γ/(τ(1-τ))`
    #[default]
    Wald,
    /// `δᵀΓ₂₂.₁δ/(τ(1-τ))`, only defined when `p₁ = p₂`.
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticInputs {
    pub blocks: GammaBlocks,
    pub tau: f64,
    pub weight: DMatrix<f64>,
    pub alpha: f64,
    pub form: RiskForm,
    pub noncentrality: NoncentralityForm,
}

impl AsymptoticInputs {
    pub fn new(blocks: GammaBlocks, tau: f64, weight: DMatrix<f64>, alpha: f64) -> Result<Self> {
        let inputs = Self {
            blocks,
            tau,
            weight,
            alpha,
            form: RiskForm::Derived,
            noncentrality: NoncentralityForm::Wald,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Identity weight.
    pub fn unweighted(blocks: GammaBlocks, tau: f64, alpha: f64) -> Result<Self> {
        let p1 = blocks.p1();
        Self::new(blocks, tau, DMatrix::identity(p1, p1), alpha)
    }

    pub fn with_form(mut self, form: RiskForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_noncentrality(mut self, nc: NoncentralityForm) -> Self {
        self.noncentrality = nc;
        self
    }

    pub fn p1(&self) -> usize {
        self.blocks.p1()
    }

    pub fn p2(&self) -> usize {
        self.blocks.p2()
    }

    fn sigma(&self) -> f64 {
        self.tau * (1.0 - self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::domain(format!("quantile level {} outside (0, 1)", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("test size {} outside (0, 1)", self.alpha)));
        }
        if self.p2() == 0 {
            return Err(Error::domain("asymptotics need p2 >= 1"));
        }
        let p1 = self.p1();
        if self.weight.shape() != (p1, p1) {
            return Err(Error::domain(format!("weight must be {p1}x{p1}")));
        }
        if !linalg::is_symmetric(&self.weight, 1e-10) || !linalg::is_positive_definite(&self.weight) {
            return Err(Error::domain("weight matrix must be symmetric positive definite"));
        }
        Ok(())
    }

    fn critical_value(&self) -> Result<f64> {
        chi2_upper_quantile(self.p2() as u32, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAlternative {
    pub gamma: DVector<f64>,
    /// `Γ₁₁⁻¹Γ₁₂γ`
    pub delta: DVector<f64>,
    pub noncentrality: f64,
    pub tau: f64,
}

impl LocalAlternative {
    pub fn new(inputs: &AsymptoticInputs, gamma: DVector<f64>) -> Result<Self> {
        if gamma.len() != inputs.p2() {
            return Err(Error::domain(format!("γ has length {}, expected {}", gamma.len(), inputs.p2())));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::domain("γ must be finite"));
        }
        let b = &inputs.blocks;
        let g11_inv = linalg::spd_inverse(&b.g11, "Γ₁₁")?;
        let delta = g11_inv * &b.g12 * &gamma;
        let noncentrality = match inputs.noncentrality {
            NoncentralityForm::Wald => (gamma.transpose() * &b.g22_1 * &gamma)[(0, 0)] / inputs.sigma(),
            NoncentralityForm::Delta => {
                if inputs.p1() != inputs.p2() {
                    return Err(Error::domain("δ-form noncentrality needs p1 = p2"));
                }
                (delta.transpose() * &b.g22_1 * &delta)[(0, 0)] / inputs.sigma()
            }
        };
        Ok(Self { gamma, delta, noncentrality: noncentrality.max(0.0), tau: inputs.tau })
    }

    /// Scales `direction` so the noncentrality equals `target`.
    pub fn with_noncentrality(inputs: &AsymptoticInputs, direction: &DVector<f64>, target: f64) -> Result<Self> {
        if !(target >= 0.0 && target.is_finite()) {
            return Err(Error::domain(format!("noncentrality must be finite and nonnegative, got {target}")));
        }
        let unit = Self::new(inputs, direction.clone())?;
        if unit.noncentrality <= 0.0 {
            return Err(Error::domain("direction has zero noncentrality"));
        }
        let scale = (target / unit.noncentrality).sqrt();
        Self::new(inputs, direction * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceObjects {
    /// `τ(1-τ) Γ₁₁⁻¹Γ₁₂Γ₂₂.₁⁻¹Γ₂₁Γ₁₁⁻¹`
    pub phi: DMatrix<f64>,
    /// `-τ(1-τ) Γ₁₂Γ₂₁Γ₁₁⁻¹`
    pub sigma12: DMatrix<f64>,
    /// `τ(1-τ)(Γ₁₁.₂⁻¹ + Γ₁₂Γ₂₁Γ₁₁⁻¹ - Γ₁₁)`
    pub sigma_star: DMatrix<f64>,
}

pub fn covariance_objects(inputs: &AsymptoticInputs) -> Result<CovarianceObjects> {
    let b = &inputs.blocks;
    let s = inputs.sigma();
    let g11_inv = linalg::spd_inverse(&b.g11, "Γ₁₁")?;
    let g22_1_inv = linalg::spd_inverse(&b.g22_1, "Γ₂₂.₁")?;
    let g11_2_inv = linalg::spd_inverse(&b.g11_2, "Γ₁₁.₂")?;
    let phi = linalg::symmetrize(&(&g11_inv * &b.g12 * g22_1_inv * &b.g21 * &g11_inv * s));
    let cross = &b.g12 * &b.g21 * &g11_inv;
    let sigma12 = &cross * (-s);
    let sigma_star = (g11_2_inv + &cross - &b.g11) * s;
    Ok(CovarianceObjects { phi, sigma12, sigma_star })
}

fn check_estimator(est: Estimator, inputs: &AsymptoticInputs) -> Result<()> {
    if est.needs_three() && inputs.p2() < 3 {
        return Err(Error::Unsupported(format!("{est} needs p2 >= 3, got {}", inputs.p2())));
    }
    Ok(())
}

fn check_alt(alt: &LocalAlternative, inputs: &AsymptoticInputs) -> Result<()> {
    if alt.delta.len() != inputs.p1() || alt.gamma.len() != inputs.p2() {
        return Err(Error::domain("local alternative does not match the Γ partition"));
    }
    Ok(())
}

/// `E_m[h]` and `E_m[h²]` for the shrinkage weight of an estimator.
#[derive(Debug, Clone, Copy)]
struct WeightMoments {
    h: f64,
    h2: f64,
}

fn weight_moments(est: Estimator, df: u32, nc: f64, p2: usize, critical: f64) -> Result<WeightMoments> {
    let dist = NoncentralChiSq::new(df, nc)?;
    let k = p2 as f64 - 2.0;
    Ok(match est {
        Estimator::FM => WeightMoments { h: 0.0, h2: 0.0 },
        Estimator::SM => WeightMoments { h: 1.0, h2: 1.0 },
        Estimator::PT => {
            let p = dist.cdf(critical)?;
            WeightMoments { h: p, h2: p }
        }
        Estimator::S => WeightMoments { h: k * dist.inv_moment(1)?, h2: k * k * dist.inv_moment(2)? },
        Estimator::PS => {
            let below = dist.cdf(k)?;
            WeightMoments {
                h: below + k * dist.truncated_inv_moment(1, k, Side::Above)?,
                h2: below + k * k * dist.truncated_inv_moment(2, k, Side::Above)?,
            }
        }
    })
}

/// Asymptotic bias of the `β₁` block.
pub fn bias(est: Estimator, alt: &LocalAlternative, inputs: &AsymptoticInputs) -> Result<DVector<f64>> {
    check_estimator(est, inputs)?;
    check_alt(alt, inputs)?;
    let p2 = inputs.p2();
    let crit = inputs.critical_value()?;
    let m = weight_moments(est, p2 as u32 + 2, alt.noncentrality, p2, crit)?;
    Ok(&alt.delta * m.h)
}

/// `Bᵀ Γ₁₁.₂ B`
pub fn quadratic_bias(est: Estimator, alt: &LocalAlternative, inputs: &AsymptoticInputs) -> Result<f64> {
    let b = bias(est, alt, inputs)?;
    Ok((b.transpose() * &inputs.blocks.g11_2 * &b)[(0, 0)].max(0.0))
}

/// `E[(√n(β̂₁ - β₁))ᵀ W (√n(β̂₁ - β₁))]` in the limit.
pub fn risk(est: Estimator, alt: &LocalAlternative, inputs: &AsymptoticInputs) -> Result<f64> {
    check_estimator(est, inputs)?;
    check_alt(alt, inputs)?;
    match inputs.form {
        RiskForm::Derived => derived_risk(est, alt, inputs),
        RiskForm::Printed => printed_risk(est, alt, inputs),
    }
}

struct RiskTerms {
    base: f64,
    sm_base: f64,
    tr_w_phi: f64,
    dwd: f64,
}

fn risk_terms(alt: &LocalAlternative, inputs: &AsymptoticInputs, phi: &DMatrix<f64>) -> Result<RiskTerms> {
    let b = &inputs.blocks;
    let w = &inputs.weight;
    let s = inputs.sigma();
    let g11_2_inv = linalg::spd_inverse(&b.g11_2, "Γ₁₁.₂")?;
    let g11_inv = linalg::spd_inverse(&b.g11, "Γ₁₁")?;
    Ok(RiskTerms {
        base: s * (w * g11_2_inv).trace(),
        sm_base: s * (w * g11_inv).trace(),
        tr_w_phi: (w * phi).trace(),
        dwd: (alt.delta.transpose() * w * &alt.delta)[(0, 0)],
    })
}

fn derived_risk(est: Estimator, alt: &LocalAlternative, inputs: &AsymptoticInputs) -> Result<f64> {
    let cov = covariance_objects(inputs)?;
    let t = risk_terms(alt, inputs, &cov.phi)?;
    if est == Estimator::SM {
        return Ok(t.sm_base + t.dwd);
    }
    let p2 = inputs.p2();
    let crit = inputs.critical_value()?;
    let m2 = weight_moments(est, p2 as u32 + 2, alt.noncentrality, p2, crit)?;
    let m4 = weight_moments(est, p2 as u32 + 4, alt.noncentrality, p2, crit)?;
    let r = t.base + t.tr_w_phi * (m2.h2 - 2.0 * m2.h) + t.dwd * (m4.h2 - 2.0 * m4.h + 2.0 * m2.h);
    Ok(r)
}

fn printed_risk(est: Estimator, alt: &LocalAlternative, inputs: &AsymptoticInputs) -> Result<f64> {
    let cov = covariance_objects(inputs)?;
    let t = risk_terms(alt, inputs, &cov.phi)?;
    let w = &inputs.weight;
    let sigma21 = cov.sigma12.transpose();
    let phi_pinv = cov
        .phi
        .clone()
        .pseudo_inverse(1e-12 * cov.phi.amax().max(1e-300))
        .map_err(|e| Error::SingularBlock(format!("Φ: {e}")))?;
    let tr_w_s21 = (w * &sigma21).trace();
    let tr_cross = (w * &alt.delta * alt.delta.transpose() * &phi_pinv * &sigma21).trace();
    let p2 = inputs.p2();
    let k = p2 as f64 - 2.0;
    let nc = alt.noncentrality;
    let d2 = NoncentralChiSq::new(p2 as u32 + 2, nc)?;
    let d4 = NoncentralChiSq::new(p2 as u32 + 4, nc)?;
    let stein = |d2: &NoncentralChiSq, d4: &NoncentralChiSq| -> Result<f64> {
        Ok(t.base - 2.0 * k * tr_w_s21 * d2.inv_moment(1)?
            - 2.0 * k * tr_cross * (d4.inv_moment(1)? + d2.inv_moment(1)?)
            + k * k * (t.tr_w_phi * d2.inv_moment(2)? + t.dwd * d4.inv_moment(2)?))
    };
    Ok(match est {
        Estimator::FM => t.base,
        Estimator::SM => t.sm_base + t.dwd,
        Estimator::PT => {
            let c = inputs.critical_value()?;
            let (h2, h4) = (d2.cdf(c)?, d4.cdf(c)?);
            t.base - 2.0 * tr_w_s21 * h2 + tr_cross * (h2 - 2.0 * h4) + t.tr_w_phi * h2 + t.dwd * h4
        }
        Estimator::S => stein(&d2, &d4)?,
        Estimator::PS => {
            let (h2, h4) = (d2.cdf(k)?, d4.cdf(k)?);
            let low2_1 = d2.truncated_inv_moment(1, k, Side::Below)?;
            let low4_1 = d4.truncated_inv_moment(1, k, Side::Below)?;
            let low2_2 = d2.truncated_inv_moment(2, k, Side::Below)?;
            stein(&d2, &d4)? - 2.0 * tr_w_s21 * (h4 - k * low2_1)
                - 2.0 * tr_cross * (1.0 - k * low4_1)
                - 2.0 * tr_cross * (1.0 - k * low2_1)
                - k * k * (t.tr_w_phi + t.dwd) * low2_2
                + t.tr_w_phi * h2
                + t.dwd * h4
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub delta: f64,
    pub estimator: Estimator,
    pub bias_norm: f64,
    pub qb: f64,
    pub risk: f64,
}

/// Bias norm, quadratic bias and risk over a noncentrality grid, moving along
/// `direction` in `γ` (all ones when `None`).
pub fn curves(
    inputs: &AsymptoticInputs,
    delta_grid: &[f64],
    estimators: &[Estimator],
    direction: Option<&DVector<f64>>,
) -> Result<Vec<CurveRow>> {
    inputs.validate()?;
    if delta_grid.is_empty() {
        return Err(Error::domain("empty noncentrality grid"));
    }
    for (k, &d) in delta_grid.iter().enumerate() {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::domain(format!("grid value {d} is not finite and nonnegative")));
        }
        if k > 0 && d <= delta_grid[k - 1] {
            return Err(Error::domain("noncentrality grid must be increasing"));
        }
    }
    for &e in estimators {
        check_estimator(e, inputs)?;
    }
    let ones = DVector::from_element(inputs.p2(), 1.0);
    let dir = direction.unwrap_or(&ones);
    let mut rows = Vec::with_capacity(delta_grid.len() * estimators.len());
    for &d in delta_grid {
        let alt = LocalAlternative::with_noncentrality(inputs, dir, d)?;
        for &e in estimators {
            rows.push(CurveRow {
                delta: d,
                estimator: e,
                bias_norm: bias(e, &alt, inputs)?.norm(),
                qb: quadratic_bias(e, &alt, inputs)?,
                risk: risk(e, &alt, inputs)?,
            });
        }
    }
    Ok(rows)
}

/// Estimators available for a given `p₂`.
pub fn available_estimators(p2: usize) -> Vec<Estimator> {
    Estimator::ALL.into_iter().filter(|e| !e.needs_three() || p2 >= 3).collect()
}

/// Writes `delta,estimator,bias_norm,qb,risk` rows.
pub fn write_curves_csv<W: std::io::Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "estimator", "bias_norm", "qb", "risk"])?;
    for r in rows {
        w.write_record([
            r.delta.to_string(),
            r.estimator.to_string(),
            r.bias_norm.to_string(),
            r.qb.to_string(),
            r.risk.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_toy() -> AsymptoticInputs {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let blocks = GammaBlocks::from_matrix(&g, 1).unwrap();
        AsymptoticInputs::unweighted(blocks, 0.5, 0.05).unwrap()
    }

    fn block_toy(p: usize) -> AsymptoticInputs {
        let mut g = DMatrix::zeros(2 * p, 2 * p);
        for i in 0..p {
            g[(i, i)] = 2.0;
            g[(p + i, p + i)] = 2.0;
            g[(i, p + i)] = 1.0;
            g[(p + i, i)] = 1.0;
        }
        AsymptoticInputs::unweighted(GammaBlocks::from_matrix(&g, p).unwrap(), 0.5, 0.05).unwrap()
    }

    #[test]
    fn phi_by_hand() {
        let cov = covariance_objects(&scalar_toy()).unwrap();
        assert!((cov.phi[(0, 0)] - 1.0 / 24.0).abs() < 1e-15);
        assert!((cov.sigma12[(0, 0)] + 0.125).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_blocks_vanish() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 1.0, 4.0]));
        let inputs = AsymptoticInputs::unweighted(GammaBlocks::from_matrix(&g, 2).unwrap(), 0.3, 0.05).unwrap();
        let cov = covariance_objects(&inputs).unwrap();
        assert_eq!(cov.phi.amax(), 0.0);
        assert_eq!(cov.sigma12.amax(), 0.0);
        let alt = LocalAlternative::new(&inputs, DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_eq!(alt.delta.amax(), 0.0);
        let fm = risk(Estimator::FM, &alt, &inputs).unwrap();
        for e in [Estimator::SM, Estimator::PT] {
            assert!((risk(e, &alt, &inputs).unwrap() - fm).abs() < 1e-12);
        }
    }

    #[test]
    fn fm_and_sm_closed_forms() {
        let inputs = scalar_toy();
        let alt = LocalAlternative::new(&inputs, DVector::from_vec(vec![0.0])).unwrap();
        assert!((risk(Estimator::FM, &alt, &inputs).unwrap() - 0.25 / 1.5).abs() < 1e-15);
        assert!((risk(Estimator::SM, &alt, &inputs).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(bias(Estimator::FM, &alt, &inputs).unwrap()[0], 0.0);
        let alt = LocalAlternative::new(&inputs, DVector::from_vec(vec![0.8])).unwrap();
        assert!((quadratic_bias(Estimator::SM, &alt, &inputs).unwrap() - 0.4 * 0.4 * 1.5).abs() < 1e-15);
        assert!((alt.noncentrality - 0.64 * 1.5 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn stein_needs_three() {
        let inputs = scalar_toy();
        let alt = LocalAlternative::new(&inputs, DVector::from_vec(vec![0.1])).unwrap();
        assert!(matches!(risk(Estimator::S, &alt, &inputs), Err(Error::Unsupported(_))));
    }

    #[test]
    fn shapes_on_the_block_toy() {
        let inputs = block_toy(5);
        let grid: Vec<f64> = (0..=60).map(|k| k as f64 * 2.0).collect();
        let rows = curves(&inputs, &grid, &Estimator::ALL, None).unwrap();
        let get = |e: Estimator, k: usize| rows[k * 5 + Estimator::ALL.iter().position(|x| *x == e).unwrap()].clone();
        let fm = get(Estimator::FM, 0).risk;
        let mut pt_above = false;
        for k in 0..grid.len() {
            assert_eq!(get(Estimator::FM, k).risk, fm);
            assert!(get(Estimator::PS, k).risk <= get(Estimator::S, k).risk + 1e-12);
            assert!(get(Estimator::PS, k).qb <= get(Estimator::S, k).qb + 1e-12);
            pt_above |= get(Estimator::PT, k).risk > fm;
            if k > 0 {
                assert!(get(Estimator::SM, k).qb > get(Estimator::SM, k - 1).qb);
            }
        }
        assert!(pt_above);
        let last = grid.len() - 1;
        assert!((get(Estimator::PT, last).risk - fm).abs() < 1e-3 * fm);
        assert!(get(Estimator::PT, last).qb < 1e-3);
        assert!(get(Estimator::S, last).qb < get(Estimator::S, 10).qb);
        assert_eq!(get(Estimator::SM, 0).qb, 0.0);
    }

    #[test]
    fn printed_form_agrees_where_cross_terms_vanish() {
        let inputs = block_toy(4).with_form(RiskForm::Printed);
        let alt = LocalAlternative::with_noncentrality(&inputs, &DVector::from_element(4, 1.0), 3.0).unwrap();
        let fm = risk(Estimator::FM, &alt, &inputs).unwrap();
        let derived = risk(Estimator::FM, &alt, &inputs.clone().with_form(RiskForm::Derived)).unwrap();
        assert_eq!(fm, derived);
        for e in Estimator::ALL {
            assert!(risk(e, &alt, &inputs).unwrap().is_finite());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let inputs = scalar_toy();
        assert!(curves(&inputs, &[], &[Estimator::FM], None).is_err());
        assert!(curves(&inputs, &[1.0, 0.5], &[Estimator::FM], None).is_err());
        assert!(LocalAlternative::new(&inputs, DVector::from_vec(vec![1.0, 2.0])).is_err());
        let mut bad = inputs.clone();
        bad.weight = DMatrix::from_element(1, 1, -1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_header() {
        let inputs = scalar_toy();
        let rows = curves(&inputs, &[0.0, 1.0], &[Estimator::FM, Estimator::PT], None).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta,estimator,bias_norm,qb,risk\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
