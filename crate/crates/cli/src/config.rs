//! Run configuration: TOML file, then command-line flags on top.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qshrink::asymptotics::{NoncentralityForm, RiskForm};
use qshrink::report::Method;
use qshrink::simlab::{ErrorModel, VarianceSchedule};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    #[default]
    Fit,
    Curves,
    Simulate,
    Ape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMethod {
    #[default]
    Explicit,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BicCriterion {
    #[default]
    Ls,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    #[default]
    Mrme,
    Pmad,
    Size,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Design {
    ModelError,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub response: Option<String>,
    pub drop_missing: bool,
    pub log_response: bool,
    pub intercept: bool,
    pub exclude: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { path: None, response: None, drop_missing: true, log_response: false, intercept: true, exclude: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub method: PartitionMethod,
    /// Sub-model columns for the explicit method.
    pub sub: Vec<String>,
    pub criterion: BicCriterion,
    /// Filled in after selection.
    #[serde(skip_deserializing, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub enet_alpha: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { enet_alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesConfig {
    /// Explicit `Γ`; estimated from the data when absent.
    pub gamma: Option<Vec<Vec<f64>>>,
    pub p1: Option<usize>,
    /// `p₁ × p₁` weight, identity when absent.
    pub weight: Option<Vec<Vec<f64>>>,
    pub direction: Option<Vec<f64>>,
    pub delta_max: f64,
    pub delta_step: f64,
    pub form: RiskForm,
    pub noncentrality: NoncentralityForm,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            p1: None,
            weight: None,
            direction: None,
            delta_max: 30.0,
            delta_step: 0.5,
            form: RiskForm::default(),
            noncentrality: NoncentralityForm::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub experiment: Experiment,
    /// Defaults to the model-error design for `mrme` and `size`, the
    /// prediction design for `pmad`.
    pub design: Option<Design>,
    pub n_train: Option<usize>,
    pub rho: Option<f64>,
    pub error: Option<ErrorModel>,
    pub schedule: Option<VarianceSchedule>,
    pub delta_grid: Option<Vec<f64>>,
    /// Error models for `pmad`, one report block each.
    pub cases: Option<Vec<ErrorModel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApeSection {
    pub splits: usize,
    pub train_fraction: f64,
    pub tuning_fraction: f64,
    pub label: String,
    pub methods: Option<Vec<Method>>,
}

impl Default for ApeSection {
    fn default() -> Self {
        Self { splits: 999, train_fraction: 0.5, tuning_fraction: 0.5, label: "ape".into(), methods: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_deserializing)]
    pub command: Command,
    #[serde(deserialize_with = "one_or_many")]
    pub tau: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
    /// Simulation replications; per-experiment default when absent.
    pub replications: Option<usize>,
    pub out: PathBuf,
    pub format: Vec<Format>,
    pub data: DataConfig,
    pub partition: PartitionConfig,
    pub penalty: PenaltyConfig,
    pub curves: CurvesConfig,
    pub simulate: SimulateConfig,
    pub ape: ApeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Fit,
            tau: Vec::new(),
            alpha: 0.05,
            seed: 42,
            replications: None,
            out: PathBuf::from("qshrink-out"),
            format: vec![Format::Csv, Format::Json],
            data: DataConfig::default(),
            partition: PartitionConfig::default(),
            penalty: PenaltyConfig::default(),
            curves: CurvesConfig::default(),
            simulate: SimulateConfig::default(),
            ape: ApeSection::default(),
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Tau {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Tau::deserialize(d)? {
        Tau::One(t) => vec![t],
        Tau::Many(v) => v,
    })
}

/// Flags shared by every subcommand; each one overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Quantile levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    /// Pretest size.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// Input CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Response column.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub log_response: bool,
    /// Fail on rows with missing values instead of dropping them.
    #[arg(long)]
    pub keep_missing: bool,
    /// Sub-model columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sub: Option<Vec<String>>,
    /// Choose the sub-model by forward-stepwise BIC.
    #[arg(long, value_enum)]
    pub partition: Option<PartitionMethod>,
    #[arg(long, value_enum)]
    pub bic_criterion: Option<BicCriterion>,
    #[arg(long)]
    pub enet_alpha: Option<f64>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long, value_enum)]
    pub design: Option<Design>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub delta_step: Option<f64>,
}

pub fn load(command: Command, flags: &Flags) -> Result<RunConfig, String> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if let Some(p) = &cfg.data.path {
                cfg.data.path = Some(relative_to(path, p));
            }
            cfg
        }
        None => RunConfig::default(),
    };
    cfg.command = command;
    if let Some(v) = &flags.tau {
        cfg.tau = v.clone();
    }
    if let Some(v) = flags.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.replications {
        cfg.replications = Some(v);
    }
    if let Some(v) = &flags.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &flags.format {
        cfg.format = v.clone();
    }
    if let Some(v) = &flags.data {
        cfg.data.path = Some(v.clone());
    }
    if let Some(v) = &flags.response {
        cfg.data.response = Some(v.clone());
    }
    if flags.log_response {
        cfg.data.log_response = true;
    }
    if flags.keep_missing {
        cfg.data.drop_missing = false;
    }
    if let Some(v) = &flags.sub {
        cfg.partition.sub = v.clone();
        cfg.partition.method = PartitionMethod::Explicit;
    }
    if let Some(v) = flags.partition {
        cfg.partition.method = v;
    }
    if let Some(v) = flags.bic_criterion {
        cfg.partition.criterion = v;
    }
    if let Some(v) = flags.enet_alpha {
        cfg.penalty.enet_alpha = v;
    }
    if let Some(v) = flags.splits {
        cfg.ape.splits = v;
    }
    if let Some(v) = flags.train_fraction {
        cfg.ape.train_fraction = v;
    }
    if let Some(v) = flags.experiment {
        cfg.simulate.experiment = v;
    }
    if let Some(v) = flags.design {
        cfg.simulate.design = Some(v);
    }
    if let Some(v) = flags.delta_max {
        cfg.curves.delta_max = v;
    }
    if let Some(v) = flags.delta_step {
        cfg.curves.delta_step = v;
    }
    cfg.resolve_defaults();
    cfg.validate()?;
    Ok(cfg)
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match config.parent() {
        Some(dir) => dir.join(p),
        None => p.to_path_buf(),
    }
}

impl RunConfig {
    /// Fills the τ list and replication count that depend on the command.
    pub fn resolve_defaults(&mut self) {
        let pmad = self.command == Command::Simulate && self.simulate.experiment == Experiment::Pmad;
        if self.tau.is_empty() {
            self.tau = if pmad { vec![0.25, 0.5, 0.75] } else { vec![0.5] };
        }
        if self.command == Command::Simulate && self.replications.is_none() {
            self.replications = Some(match self.simulate.experiment {
                Experiment::Mrme => 1000,
                Experiment::Pmad => 500,
                Experiment::Size => 2000,
            });
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tau.is_empty() {
            return Err("empty tau list".into());
        }
        if let Some(t) = self.tau.iter().find(|t| !(0.01..=0.99).contains(*t)) {
            return Err(format!("tau {t} outside [0.01, 0.99]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.format.is_empty() {
            return Err("no output format".into());
        }
        if self.replications == Some(0) {
            return Err("replications must be at least 1".into());
        }
        let needs_data = match self.command {
            Command::Fit | Command::Ape => true,
            Command::Curves => self.curves.gamma.is_none(),
            Command::Simulate => false,
        };
        if needs_data {
            let Some(path) = &self.data.path else {
                return Err("no input data (set data.path or --data)".into());
            };
            if !path.is_file() {
                return Err(format!("input file {} does not exist", path.display()));
            }
            if self.data.response.is_none() {
                return Err("no response column (set data.response or --response)".into());
            }
        }
        if self.command == Command::Curves {
            let c = &self.curves;
            if !(c.delta_step > 0.0 && c.delta_max >= 0.0 && c.delta_max.is_finite()) {
                return Err("curves need delta_step > 0 and a finite delta_max >= 0".into());
            }
            if c.gamma.is_some() && c.p1.is_none() {
                return Err("an explicit gamma needs p1".into());
            }
        }
        Ok(())
    }
}
