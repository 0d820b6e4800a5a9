//! Forward-stepwise sub-model selection by BIC.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantreg::{self, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// `n ln(RSS/n) + k ln n`
    #[default]
    LeastSquares,
    /// `n ln(Σρ_τ/n) + (k/2) ln n`
    Quantile { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Selected covariate names, in order of entry (intercept excluded).
    pub selected: Vec<String>,
    /// Criterion value after each step, starting from the base model.
    pub path: Vec<f64>,
}

fn score(data: &Dataset, cols: &[usize], criterion: Criterion) -> Result<f64> {
    let n = data.n() as f64;
    let k = cols.len() as f64;
    let x = linalg::select_columns(data.x(), cols);
    let y = data.y();
    match criterion {
        Criterion::LeastSquares => {
            let rss = if cols.is_empty() {
                y.norm_squared()
            } else {
                let b = linalg::least_squares(&x, y)?;
                (y - &x * b).norm_squared()
            };
            Ok(n * (rss.max(1e-300) / n).ln() + k * n.ln())
        }
        Criterion::Quantile { tau } => {
            let loss = if cols.is_empty() {
                quantreg::total_check_loss(y, tau)
            } else {
                quantreg::solve_check_loss(&x, y, tau, &SolverOptions::default())?.objective
            };
            Ok(n * (loss.max(1e-300) / n).ln() + 0.5 * k * n.ln())
        }
    }
}

/// Greedy forward selection from the intercept-only model (or the empty model
/// without an intercept), stopping when no addition lowers the criterion.
pub fn select_submodel_bic(data: &Dataset, criterion: Criterion) -> Result<Selection> {
    if data.n() <= data.p() {
        return Err(Error::domain(format!("selection needs n > p (n = {}, p = {})", data.n(), data.p())));
    }
    if let Criterion::Quantile { tau } = criterion {
        quantreg::validate_tau(tau)?;
    }
    let mut chosen: Vec<usize> = data.intercept_column().into_iter().collect();
    let mut candidates: Vec<usize> = (0..data.p()).filter(|j| !chosen.contains(j)).collect();
    let mut current = score(data, &chosen, criterion)?;
    let mut path = vec![current];
    let mut selected = Vec::new();
    while !candidates.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (k, &j) in candidates.iter().enumerate() {
            let mut cols = chosen.clone();
            cols.push(j);
            let s = score(data, &cols, criterion)?;
            if best.is_none_or(|b| s < b.0) {
                best = Some((s, k));
            }
        }
        let (s, k) = best.expect("nonempty candidates");
        if s >= current {
            break;
        }
        let j = candidates.remove(k);
        chosen.push(j);
        selected.push(data.names()[j].clone());
        current = s;
        path.push(s);
    }
    Ok(Selection { selected, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn toy(seed: u64, signal: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 100;
        let x = DMatrix::from_fn(n, 6, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let y = DVector::from_fn(n, |i, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            if signal { 5.0 * x[(i, 3)] + e } else { e }
        });
        let names = ["intercept", "a", "b", "c", "d", "e"].map(String::from).to_vec();
        Dataset::with_names(y, x, 6, names).unwrap()
    }

    #[test]
    fn dominant_predictor_enters_first() {
        let d = toy(1, true);
        assert_eq!(select_submodel_bic(&d, Criterion::LeastSquares).unwrap().selected[0], "c");
        assert_eq!(select_submodel_bic(&d, Criterion::Quantile { tau: 0.5 }).unwrap().selected[0], "c");
    }

    #[test]
    fn pure_noise_selects_little() {
        for seed in 0..5 {
            let s = select_submodel_bic(&toy(seed, false), Criterion::LeastSquares).unwrap();
            assert!(s.selected.len() <= 2, "{:?}", s.selected);
        }
    }

    #[test]
    fn path_decreases() {
        let s = select_submodel_bic(&toy(3, true), Criterion::LeastSquares).unwrap();
        assert!(s.path.windows(2).all(|w| w[1] < w[0]));
    }
}
