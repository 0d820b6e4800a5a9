//! Non-central chi-square kernel: distribution function, inverse moments and
//! truncated inverse moments.
//!
//! Every quantity is evaluated as a Poisson(Δ/2) mixture over central
//! chi-square components with `df + 2k` degrees of freedom. For a central
//! component with `m` degrees of freedom the truncated inverse moment has the
//! closed form
//!
//! ```text
//! ∫₀^c x^{-j} f_m(x) dx = 2^{-j} Γ(m/2 - j) / Γ(m/2) · H_{m-2j}(c; 0)
//! ```
//!
//! so no quadrature is involved. The Gamma ratio collapses to
//! `∏_{i=1..j} 1/(m - 2i)` for the integer orders used here.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};

/// Remaining Poisson mass at which the mixture series is cut.
pub const TAIL_MASS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoncentralChiSq {
    df: u32,
    noncentrality: f64,
}

/// Which side of the cutoff a truncated moment integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `X <= c`
    Below,
    /// `X > c`
    Above,
}

impl NoncentralChiSq {
    pub fn new(df: u32, noncentrality: f64) -> Result<Self> {
        if df == 0 {
            return Err(Error::domain("degrees of freedom must be at least 1"));
        }
        if !noncentrality.is_finite() || noncentrality < 0.0 {
            return Err(Error::domain(format!(
                "noncentrality must be finite and nonnegative, got {noncentrality}"
            )));
        }
        Ok(Self { df, noncentrality })
    }

    pub fn central(df: u32) -> Result<Self> {
        Self::new(df, 0.0)
    }

    pub fn df(&self) -> u32 {
        self.df
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    /// `H_v(x; Δ) = P(χ²_v(Δ) <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_point(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let v = self.mixture(|m| central_cdf(m, x));
        Ok(v.clamp(0.0, 1.0))
    }

    /// `1 - H_v(x; Δ)`, computed from the upper incomplete gamma directly.
    pub fn sf(&self, x: f64) -> Result<f64> {
        check_point(x)?;
        if x == 0.0 {
            return Ok(1.0);
        }
        let v = self.mixture(|m| central_sf(m, x));
        Ok(v.clamp(0.0, 1.0))
    }

    /// `E[(χ²_v(Δ))^{-j}]` for `j ∈ {1, 2}`.
    pub fn inv_moment(&self, j: u32) -> Result<f64> {
        if !(1..=2).contains(&j) {
            return Err(Error::Unsupported(format!(
                "inverse moment of order {j}; only orders 1 and 2 are implemented"
            )));
        }
        self.check_finite_order(j)?;
        Ok(self.mixture(|m| gamma_ratio(m, j)))
    }

    /// `E[(χ²_v(Δ))^{-j} · I(χ²_v(Δ) <= c)]` (below) or with `I(· > c)` (above).
    ///
    /// `j = 0` gives the truncated probability mass.
    pub fn truncated_inv_moment(&self, j: u32, cutoff: f64, side: Side) -> Result<f64> {
        if j > 2 {
            return Err(Error::Unsupported(format!(
                "truncated inverse moment of order {j}; only orders 0, 1 and 2 are implemented"
            )));
        }
        if cutoff.is_nan() || cutoff <= 0.0 {
            return Err(Error::domain(format!("cutoff must be positive, got {cutoff}")));
        }
        self.check_finite_order(j)?;
        let value = self.mixture(|m| {
            let shifted = m - 2 * j;
            let ratio = gamma_ratio(m, j);
            match side {
                Side::Below if cutoff.is_infinite() => ratio,
                Side::Above if cutoff.is_infinite() => 0.0,
                Side::Below => ratio * central_cdf(shifted, cutoff),
                Side::Above => ratio * central_sf(shifted, cutoff),
            }
        });
        Ok(value.max(0.0))
    }

    fn check_finite_order(&self, j: u32) -> Result<()> {
        if self.df <= 2 * j {
            return Err(Error::domain(format!(
                "inverse moment of order {j} is infinite for {} degrees of freedom (need df > {})",
                self.df,
                2 * j
            )));
        }
        Ok(())
    }

    /// `Σ_k Poisson(k; Δ/2) · f(df + 2k)`, cut once the remaining mass on
    /// each side is below [`TAIL_MASS`].
    fn mixture<F: Fn(u32) -> f64>(&self, f: F) -> f64 {
        let lambda = 0.5 * self.noncentrality;
        if lambda == 0.0 {
            return f(self.df);
        }
        let mode = lambda.floor();
        let log_w_mode = -lambda + mode * lambda.ln() - ln_factorial(mode);
        let w_mode = log_w_mode.exp();
        let mode = mode as u64;

        // Each side stops once the geometric bound on its remaining mass is
        // below the tail threshold; terms are summed smallest-first.
        let mut down = vec![(mode, w_mode)];
        let (mut k, mut w) = (mode, w_mode);
        while k > 0 {
            w *= k as f64 / lambda;
            k -= 1;
            down.push((k, w));
            let r = k as f64 / lambda;
            if r < 1.0 && w * r / (1.0 - r) < TAIL_MASS {
                break;
            }
        }
        let mut up = Vec::new();
        let (mut k, mut w) = (mode, w_mode);
        loop {
            w *= lambda / (k + 1) as f64;
            k += 1;
            up.push((k, w));
            let r = lambda / (k + 1) as f64;
            if r < 1.0 && w * r / (1.0 - r) < TAIL_MASS {
                break;
            }
        }
        let eval = |(k, w): (u64, f64)| w * f(self.df + 2 * k as u32);
        let lower: f64 = down.into_iter().rev().map(eval).sum();
        let upper: f64 = up.into_iter().rev().map(eval).sum();
        lower + upper
    }
}

fn check_point(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::domain(format!("evaluation point must be finite, got {x}")));
    }
    if x < 0.0 {
        return Err(Error::domain(format!("evaluation point must be nonnegative, got {x}")));
    }
    Ok(())
}

/// `2^{-j} Γ(m/2 - j) / Γ(m/2)`, i.e. `E[(χ²_m)^{-j}]` for a central component.
fn gamma_ratio(m: u32, j: u32) -> f64 {
    (1..=j).map(|i| 1.0 / (m as f64 - 2.0 * i as f64)).product()
}

fn ln_factorial(k: f64) -> f64 {
    statrs::function::gamma::ln_gamma(k + 1.0)
}

/// Central chi-square distribution function.
pub fn central_cdf(df: u32, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(0.5 * df as f64, 0.5 * x)
    }
}

/// Central chi-square survival function.
pub fn central_sf(df: u32, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(0.5 * df as f64, 0.5 * x)
    }
}

/// Upper-`alpha` quantile of the central chi-square with `df` degrees of freedom,
/// i.e. the `c` with `P(χ²_df > c) = alpha`.
pub fn chi2_upper_quantile(df: u32, alpha: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("degrees of freedom must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("test size must lie in (0, 1), got {alpha}")));
    }
    // Bracket then bisect on the survival function; it is monotone in x.
    let mut lo = 0.0;
    let mut hi = (df as f64).max(1.0);
    while central_sf(df, hi) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if central_sf(df, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
