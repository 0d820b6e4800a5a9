//! Replicated-metric tables and their CSV / JSON / text renderings.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::Estimator;

/// Every method that appears in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    FM,
    SM,
    PT,
    S,
    PS,
    Ridge,
    Lasso,
    ENet,
    LSE,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FM => "FM",
            Self::SM => "SM",
            Self::PT => "PT",
            Self::S => "S",
            Self::PS => "PS",
            Self::Ridge => "Ridge",
            Self::Lasso => "Lasso",
            Self::ENet => "ENET",
            Self::LSE => "LSE",
        }
    }

    pub fn shrinkage(self) -> Option<Estimator> {
        match self {
            Self::FM => Some(Estimator::FM),
            Self::SM => Some(Estimator::SM),
            Self::PT => Some(Estimator::PT),
            Self::S => Some(Estimator::S),
            Self::PS => Some(Estimator::PS),
            _ => None,
        }
    }
}

impl From<Estimator> for Method {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::FM => Self::FM,
            Estimator::SM => Self::SM,
            Estimator::PT => Self::PT,
            Estimator::S => Self::S,
            Estimator::PS => Self::PS,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "fm" => Self::FM,
            "sm" => Self::SM,
            "pt" => Self::PT,
            "s" => Self::S,
            "ps" => Self::PS,
            "ridge" => Self::Ridge,
            "lasso" => Self::Lasso,
            "enet" => Self::ENet,
            "lse" => Self::LSE,
            other => return Err(Error::domain(format!("unknown method {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub tau: f64,
    pub estimator: Method,
    pub case: String,
    pub gamma: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmeRow {
    pub delta_star: f64,
    pub estimator: Method,
    /// `None` when the estimator's median model error is zero.
    pub mrme: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportKind {
    Metric,
    Mrme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub metric: String,
    pub seed: u64,
    pub replications: usize,
    pub provenance: String,
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(metric: &str, seed: u64, replications: usize, config: serde_json::Value) -> Self {
        Self {
            metric: metric.to_string(),
            seed,
            replications,
            provenance: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            config,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ReportKind,
    pub rows: Vec<MetricRow>,
    pub mrme: Vec<MrmeRow>,
    pub metadata: Metadata,
}

impl ExperimentReport {
    pub fn metric(rows: Vec<MetricRow>, metadata: Metadata) -> Self {
        Self { kind: ReportKind::Metric, rows, mrme: Vec::new(), metadata }
    }

    pub fn mrme(rows: Vec<MrmeRow>, metadata: Metadata) -> Self {
        Self { kind: ReportKind::Mrme, rows: Vec::new(), mrme: rows, metadata }
    }

    /// Concatenates metric reports, keeping the first metadata and all notes.
    pub fn merge(reports: Vec<ExperimentReport>) -> Result<Self> {
        let mut it = reports.into_iter();
        let mut out = it.next().ok_or_else(|| Error::domain("nothing to merge"))?;
        for r in it {
            if r.kind != out.kind {
                return Err(Error::domain("cannot merge reports of different kinds"));
            }
            out.rows.extend(r.rows);
            out.mrme.extend(r.mrme);
            out.metadata.notes.extend(r.metadata.notes);
        }
        Ok(out)
    }

    pub fn find(&self, tau: f64, method: Method, case: &str, gamma: f64) -> Option<&MetricRow> {
        self.rows.iter().find(|r| {
            (r.tau - tau).abs() < 1e-12 && r.estimator == method && r.case == case && (r.gamma - gamma).abs() < 1e-12
        })
    }

    pub fn mrme_at(&self, delta_star: f64, method: Method) -> Option<f64> {
        self.mrme
            .iter()
            .find(|r| (r.delta_star - delta_star).abs() < 1e-12 && r.estimator == method)
            .and_then(|r| r.mrme)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self.kind {
            ReportKind::Metric => {
                w.write_record(["tau", "estimator", "case", "gamma", "mean", "se"])?;
                for r in &self.rows {
                    w.write_record([
                        r.tau.to_string(),
                        r.estimator.to_string(),
                        r.case.clone(),
                        r.gamma.to_string(),
                        r.mean.to_string(),
                        r.se.to_string(),
                    ])?;
                }
            }
            ReportKind::Mrme => {
                w.write_record(["delta_star", "estimator", "mrme"])?;
                for r in &self.mrme {
                    w.write_record([
                        r.delta_star.to_string(),
                        r.estimator.to_string(),
                        r.mrme.map(|v| v.to_string()).unwrap_or_default(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed-width table: one line per (case, γ, τ), one column per method,
    /// cells `mean (se)`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ReportKind::Metric => {
                let mut methods: Vec<Method> = Vec::new();
                let mut keys: Vec<(String, f64, f64)> = Vec::new();
                for r in &self.rows {
                    if !methods.contains(&r.estimator) {
                        methods.push(r.estimator);
                    }
                    let key = (r.case.clone(), r.gamma, r.tau);
                    if !keys.contains(&key) {
                        keys.push(key);
                    }
                }
                out.push_str(&format!("{:<10} {:>6} {:>5}", "case", "gamma", "tau"));
                for m in &methods {
                    out.push_str(&format!(" {:>15}", m.as_str()));
                }
                out.push('\n');
                for (case, gamma, tau) in &keys {
                    out.push_str(&format!("{:<10} {:>6.2} {:>5.2}", case, gamma, tau));
                    for m in &methods {
                        let cell = self
                            .find(*tau, *m, case, *gamma)
                            .map(|r| format!("{:.3} ({:.3})", r.mean, r.se))
                            .unwrap_or_else(|| "-".into());
                        out.push_str(&format!(" {cell:>15}"));
                    }
                    out.push('\n');
                }
            }
            ReportKind::Mrme => {
                let mut methods: Vec<Method> = Vec::new();
                let mut deltas: Vec<f64> = Vec::new();
                for r in &self.mrme {
                    if !methods.contains(&r.estimator) {
                        methods.push(r.estimator);
                    }
                    if !deltas.contains(&r.delta_star) {
                        deltas.push(r.delta_star);
                    }
                }
                out.push_str(&format!("{:>8}", "delta*"));
                for m in &methods {
                    out.push_str(&format!(" {:>8}", m.as_str()));
                }
                out.push('\n');
                for d in &deltas {
                    out.push_str(&format!("{d:>8.3}"));
                    for m in &methods {
                        let cell = self.mrme_at(*d, *m).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                        out.push_str(&format!(" {cell:>8}"));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
