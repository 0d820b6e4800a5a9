//! Wald statistic and the pretest, Stein and positive-part Stein combinations
//! of a full-model and a sub-model fit.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantreg::{self, GammaBlocks, QuantileFit, SolverOptions};
use crate::specfun::chi2_upper_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    FM,
    SM,
    PT,
    S,
    PS,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [Self::FM, Self::SM, Self::PT, Self::S, Self::PS];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FM => "FM",
            Self::SM => "SM",
            Self::PT => "PT",
            Self::S => "S",
            Self::PS => "PS",
        }
    }

    /// Stein-type estimators need `p₂ >= 3`.
    pub fn needs_three(self) -> bool {
        matches!(self, Self::S | Self::PS)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FM" => Ok(Self::FM),
            "SM" => Ok(Self::SM),
            "PT" => Ok(Self::PT),
            "S" => Ok(Self::S),
            "PS" => Ok(Self::PS),
            other => Err(Error::domain(format!("unknown estimator {other:?}"))),
        }
    }
}

/// A combined coefficient vector with the factor applied to `FM - SM`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub beta: DVector<f64>,
    /// Weight on `FM - SM`: 0 or 1 for the pretest, `1 - (p₂-2)/W` for Stein.
    pub factor: f64,
    /// `W = 0` forced the sub-model.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageResult {
    pub tau: f64,
    pub wald: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub beta_fm: DVector<f64>,
    pub beta_sm: DVector<f64>,
    pub beta_pt: DVector<f64>,
    /// `None` when `p₂ < 3`.
    pub beta_s: Option<DVector<f64>>,
    pub beta_ps: Option<DVector<f64>>,
    /// `β̂₂` of the full model.
    pub beta2_fm: DVector<f64>,
    pub shrink_factor: Option<f64>,
    /// `W <= χ²_{p₂,α}`
    pub pretest_accepted: bool,
    /// The positive-part factor was clipped to zero.
    pub positive_part_truncated: bool,
    pub degenerate: bool,
}

impl ShrinkageResult {
    pub fn p1(&self) -> usize {
        self.beta_fm.len()
    }

    pub fn p2(&self) -> usize {
        self.beta2_fm.len()
    }

    /// `β₁` block of an estimator.
    pub fn beta1(&self, est: Estimator) -> Option<&DVector<f64>> {
        match est {
            Estimator::FM => Some(&self.beta_fm),
            Estimator::SM => Some(&self.beta_sm),
            Estimator::PT => Some(&self.beta_pt),
            Estimator::S => self.beta_s.as_ref(),
            Estimator::PS => self.beta_ps.as_ref(),
        }
    }

    /// Length-`p` coefficients: the combination weight applied to `FM - SM`
    /// is also applied to the `β₂` block (where SM is zero).
    pub fn full_vector(&self, est: Estimator) -> Option<DVector<f64>> {
        let weight = match est {
            Estimator::FM => 1.0,
            Estimator::SM => 0.0,
            Estimator::PT => {
                if self.pretest_accepted {
                    0.0
                } else {
                    1.0
                }
            }
            Estimator::S => self.shrink_factor?,
            Estimator::PS => self.shrink_factor?.max(0.0),
        };
        let beta1 = self.beta1(est)?;
        let mut out = DVector::zeros(self.p1() + self.p2());
        out.rows_mut(0, self.p1()).copy_from(beta1);
        out.rows_mut(self.p1(), self.p2()).copy_from(&(&self.beta2_fm * weight));
        Some(out)
    }
}

/// `W = n/(τ(1-τ)) · β̂₂ᵀ Γ̂₂₂.₁ β̂₂`
pub fn wald_statistic(full: &QuantileFit, blocks: &GammaBlocks) -> Result<f64> {
    if full.p2() == 0 {
        return Err(Error::domain("Wald statistic needs p2 >= 1"));
    }
    if blocks.p2() != full.p2() {
        return Err(Error::domain("Γ blocks do not match the fit partition"));
    }
    if !linalg::is_positive_definite(&blocks.g22_1) {
        return Err(Error::SingularBlock("Γ₂₂.₁ is not positive definite".into()));
    }
    let b2 = full.beta2();
    let q = (b2.transpose() * &blocks.g22_1 * &b2)[(0, 0)];
    Ok((full.n() as f64 / (full.tau * (1.0 - full.tau)) * q).max(0.0))
}

fn check_pair(fm: &DVector<f64>, sm: &DVector<f64>) -> Result<()> {
    if fm.len() != sm.len() {
        return Err(Error::domain(format!(
            "β₁ blocks differ in length ({} vs {})",
            fm.len(),
            sm.len()
        )));
    }
    if sm.is_empty() {
        return Err(Error::domain("empty β₁ block"));
    }
    Ok(())
}

fn check_wald(wald: f64) -> Result<()> {
    if !(wald >= 0.0) || wald.is_nan() {
        return Err(Error::domain(format!("Wald statistic must be nonnegative, got {wald}")));
    }
    Ok(())
}

/// Sub-model when `W <= χ²_{p₂,α}`, otherwise the full model.
pub fn pretest(
    fm: &DVector<f64>,
    sm: &DVector<f64>,
    wald: f64,
    p2: usize,
    alpha: f64,
) -> Result<Combination> {
    check_pair(fm, sm)?;
    check_wald(wald)?;
    if p2 == 0 {
        return Err(Error::domain("pretest needs p2 >= 1"));
    }
    let crit = chi2_upper_quantile(p2 as u32, alpha)?;
    Ok(pretest_with_critical(fm, sm, wald, crit))
}

pub fn pretest_with_critical(fm: &DVector<f64>, sm: &DVector<f64>, wald: f64, critical: f64) -> Combination {
    if wald <= critical {
        Combination { beta: sm.clone(), factor: 0.0, degenerate: false }
    } else {
        Combination { beta: fm.clone(), factor: 1.0, degenerate: false }
    }
}

fn stein_factor(wald: f64, p2: usize) -> Result<Option<f64>> {
    if p2 < 3 {
        return Err(Error::Unsupported(format!("Stein-type estimators need p2 >= 3, got {p2}")));
    }
    check_wald(wald)?;
    if wald == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - (p2 as f64 - 2.0) / wald))
}

fn blend(fm: &DVector<f64>, sm: &DVector<f64>, factor: f64) -> DVector<f64> {
    if factor == 0.0 {
        return sm.clone();
    }
    if factor == 1.0 {
        return fm.clone();
    }
    sm + (fm - sm) * factor
}

/// `SM + (FM - SM)(1 - (p₂-2)/W)`
pub fn stein(fm: &DVector<f64>, sm: &DVector<f64>, wald: f64, p2: usize) -> Result<Combination> {
    check_pair(fm, sm)?;
    Ok(match stein_factor(wald, p2)? {
        Some(f) => Combination { beta: blend(fm, sm, f), factor: f, degenerate: false },
        None => Combination { beta: sm.clone(), factor: 0.0, degenerate: true },
    })
}

/// `SM + (FM - SM) max(0, 1 - (p₂-2)/W)`
pub fn positive_stein(fm: &DVector<f64>, sm: &DVector<f64>, wald: f64, p2: usize) -> Result<Combination> {
    check_pair(fm, sm)?;
    Ok(match stein_factor(wald, p2)? {
        Some(f) => {
            let f = f.max(0.0);
            Combination { beta: blend(fm, sm, f), factor: f, degenerate: false }
        }
        None => Combination { beta: sm.clone(), factor: 0.0, degenerate: true },
    })
}

/// Builds all five estimators from a full and a restricted fit.
pub fn combine(full: &QuantileFit, sub: &QuantileFit, alpha: f64) -> Result<ShrinkageResult> {
    if full.p2() == 0 {
        return Err(Error::domain("shrinkage needs a nonempty X₂ block"));
    }
    if sub.p() != full.p1 {
        return Err(Error::domain("sub-model fit does not match the β₁ block"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("test size must lie in (0, 1), got {alpha}")));
    }
    let blocks = quantreg::gamma_blocks(full)?;
    let wald = wald_statistic(full, &blocks)?;
    let p2 = full.p2();
    let fm = full.beta1();
    let sm = sub.beta.clone();
    let critical_value = chi2_upper_quantile(p2 as u32, alpha)?;
    let pt = pretest_with_critical(&fm, &sm, wald, critical_value);
    let (beta_s, beta_ps, shrink_factor, truncated, degenerate) = if p2 >= 3 {
        let s = stein(&fm, &sm, wald, p2)?;
        let ps = positive_stein(&fm, &sm, wald, p2)?;
        let raw = if s.degenerate { None } else { Some(s.factor) };
        let truncated = raw.is_none_or(|f| f < 0.0);
        (Some(s.beta), Some(ps.beta), Some(raw.unwrap_or(0.0)), truncated, s.degenerate)
    } else {
        (None, None, None, false, false)
    };
    Ok(ShrinkageResult {
        tau: full.tau,
        wald,
        critical_value,
        alpha,
        beta_fm: fm,
        beta_sm: sm,
        beta_pt: pt.beta,
        beta_s,
        beta_ps,
        beta2_fm: full.beta2(),
        shrink_factor,
        pretest_accepted: pt.factor == 0.0,
        positive_part_truncated: truncated,
        degenerate,
    })
}

/// Fits both models on `data` and combines them.
pub fn estimate(data: &Dataset, tau: f64, alpha: f64) -> Result<ShrinkageResult> {
    estimate_with(data, tau, alpha, &SolverOptions::default())
}

/// Identically zero `X₂` columns carry no information: they are left out of
/// the fit and their coefficients are zero in every estimator. When the whole
/// `X₂` block is zero every estimator equals SM and `W = 0`.
pub fn estimate_with(data: &Dataset, tau: f64, alpha: f64, opts: &SolverOptions) -> Result<ShrinkageResult> {
    let p1 = data.p1();
    let p2 = data.p2();
    let live: Vec<usize> =
        (0..data.p()).filter(|&j| j < p1 || data.x().column(j).iter().any(|v| *v != 0.0)).collect();
    if live.len() == data.p() || p2 == 0 {
        let full = quantreg::fit_full_with(data, tau, opts)?;
        let sub = quantreg::fit_sub_with(data, tau, opts)?;
        return combine(&full, &sub, alpha);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("test size must lie in (0, 1), got {alpha}")));
    }
    if live.len() == p1 {
        let sm = quantreg::fit_sub_with(data, tau, opts)?.beta;
        let stein = p2 >= 3;
        return Ok(ShrinkageResult {
            tau,
            wald: 0.0,
            critical_value: chi2_upper_quantile(p2 as u32, alpha)?,
            alpha,
            beta_fm: sm.clone(),
            beta_pt: sm.clone(),
            beta_s: stein.then(|| sm.clone()),
            beta_ps: stein.then(|| sm.clone()),
            beta_sm: sm,
            beta2_fm: DVector::zeros(p2),
            shrink_factor: stein.then_some(0.0),
            pretest_accepted: true,
            positive_part_truncated: stein,
            degenerate: stein,
        });
    }
    let names = live.iter().map(|&j| data.names()[j].clone()).collect();
    let reduced = Dataset::with_names(data.y().clone(), linalg::select_columns(data.x(), &live), p1, names)?;
    let mut r = estimate_with(&reduced, tau, alpha, opts)?;
    let mut beta2 = DVector::zeros(p2);
    for (k, &j) in live[p1..].iter().enumerate() {
        beta2[j - p1] = r.beta2_fm[k];
    }
    r.beta2_fm = beta2;
    Ok(r)
}
