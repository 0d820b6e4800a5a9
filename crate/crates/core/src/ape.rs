//! Average prediction error over repeated random train/test splits.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantreg::{self, SolverOptions};
use crate::report::{mean_se, ExperimentReport, Metadata, Method, MetricRow};
use crate::shrinkage;
use crate::simlab::{fit_method, mean_absolute_deviation, PREDICTION_METHODS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApeConfig {
    pub tau_list: Vec<f64>,
    pub splits: usize,
    pub seed: u64,
    /// Share of rows used for training; `1.0` evaluates on the training rows.
    pub train_fraction: f64,
    /// Share of the training rows used to fit each λ when tuning penalties;
    /// the rest scores it, and the chosen λ is refit on all training rows.
    pub tuning_fraction: f64,
    pub alpha: f64,
    pub enet_alpha: f64,
    pub methods: Vec<Method>,
    /// Label written to the `case` column.
    pub label: String,
}

impl Default for ApeConfig {
    fn default() -> Self {
        Self {
            tau_list: vec![0.5],
            splits: 999,
            seed: 42,
            train_fraction: 0.5,
            tuning_fraction: 0.5,
            alpha: 0.05,
            enet_alpha: 0.5,
            methods: PREDICTION_METHODS.to_vec(),
            label: "ape".into(),
        }
    }
}

impl ApeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.splits == 0 {
            return Err(Error::domain("splits must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::domain("train fraction outside (0, 1]"));
        }
        if !(self.tuning_fraction > 0.0 && self.tuning_fraction < 1.0) {
            return Err(Error::domain("tuning fraction outside (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("test size outside (0, 1)"));
        }
        for &t in &self.tau_list {
            quantreg::validate_tau(t)?;
        }
        if self.methods.is_empty() {
            return Err(Error::domain("no methods requested"));
        }
        Ok(())
    }
}

fn shuffled(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

fn penalized_fit(
    method: Method,
    train: &Dataset,
    tau: f64,
    cfg: &ApeConfig,
    split: usize,
) -> Result<DVector<f64>> {
    let n = train.n();
    let idx = shuffled(n, cfg.seed ^ 0x9e37_79b9_7f4a_7c15, split as u64);
    let cut = ((n as f64) * cfg.tuning_fraction).round() as usize;
    let cut = cut.clamp(train.p(), n - 1);
    let inner = train.select_rows(&idx[..cut])?;
    let valid = train.select_rows(&idx[cut..])?;
    let alpha = match method {
        Method::Ridge => 0.0,
        Method::Lasso => 1.0,
        _ => cfg.enet_alpha,
    };
    let spec = crate::penalized::PenaltySpec::elastic_net(alpha);
    let tuned = crate::penalized::tune_default(&inner, &valid, tau, &spec)?;
    Ok(crate::penalized::fit_penalized(train, tau, &spec, tuned.lambda)?.beta)
}

/// Test-set mean absolute deviations of one split: `out[t][m]`.
pub fn split_errors(data: &Dataset, cfg: &ApeConfig, split: usize) -> Result<Vec<Vec<f64>>> {
    let n = data.n();
    let (train, test) = if cfg.train_fraction >= 1.0 {
        (data.clone(), data.clone())
    } else {
        let idx = shuffled(n, cfg.seed, split as u64);
        let cut = ((n as f64) * cfg.train_fraction).round() as usize;
        if cut < data.p() || cut >= n {
            return Err(Error::domain(format!("split leaves {cut} training rows for {} columns", data.p())));
        }
        (data.select_rows(&idx[..cut])?, data.select_rows(&idx[cut..])?)
    };
    let lse = linalg::least_squares(train.x(), train.y())?;
    let opts = SolverOptions::default();
    cfg.tau_list
        .iter()
        .map(|&tau| {
            let shrink = if cfg.methods.iter().any(|m| m.shrinkage().is_some()) {
                Some(shrinkage::estimate_with(&train, tau, cfg.alpha, &opts)?)
            } else {
                None
            };
            cfg.methods
                .iter()
                .map(|&m| {
                    let beta = match m {
                        Method::LSE => lse.clone(),
                        Method::Ridge | Method::Lasso | Method::ENet => penalized_fit(m, &train, tau, cfg, split)?,
                        _ => fit_method(m, shrink.as_ref(), &train, &train, tau, cfg.enet_alpha)?,
                    };
                    Ok(mean_absolute_deviation(&test, &beta))
                })
                .collect()
        })
        .collect()
}

/// Mean and standard error over splits of the test-set mean absolute
/// deviation, for each (τ, method). `data` carries the partition in `p1`.
pub fn ape_protocol(data: &Dataset, cfg: &ApeConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if data.p2() == 0 && cfg.methods.iter().any(|m| matches!(m, Method::PT | Method::S | Method::PS)) {
        return Err(Error::Schema("partition leaves no X₂ columns".into()));
    }
    let per_split: Vec<Vec<Vec<f64>>> = (0..cfg.splits)
        .into_par_iter()
        .map(|s| split_errors(data, cfg, s))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (t, &tau) in cfg.tau_list.iter().enumerate() {
        for (m, &method) in cfg.methods.iter().enumerate() {
            let values: Vec<f64> = per_split.iter().map(|v| v[t][m]).collect();
            let (mean, se) = mean_se(&values);
            rows.push(MetricRow { tau, estimator: method, case: cfg.label.clone(), gamma: 0.0, mean, se });
        }
    }
    let config = serde_json::json!({
        "ape": cfg,
        "n": data.n(),
        "columns": data.names(),
        "p1": data.p1(),
    });
    let mut meta = Metadata::new("APE", cfg.seed, cfg.splits, config);
    meta.notes.push(format!(
        "train fraction {}; penalties tuned on a {} / {} split of the training rows, then refit",
        cfg.train_fraction,
        cfg.tuning_fraction,
        1.0 - cfg.tuning_fraction
    ));
    Ok(ExperimentReport::metric(rows, meta))
}
