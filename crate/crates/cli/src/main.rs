mod config;

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use qshrink::ape::{self, ApeConfig};
use qshrink::asymptotics::{self, AsymptoticInputs, CurveRow};
use qshrink::ingest::{self, IngestOptions};
use qshrink::quantreg::{self, GammaBlocks};
use qshrink::report::ExperimentReport;
use qshrink::selection::{self, Criterion};
use qshrink::shrinkage::{self, Estimator};
use qshrink::simlab::{self, ErrorModel, SimulationConfig};
use qshrink::{Dataset, Error};
use serde::Serialize;

use config::{BicCriterion, Command, Design, Experiment, Flags, Format, PartitionMethod, RunConfig};

#[derive(Parser)]
#[command(name = "qshrink", version, about = "Pretest and Stein-type shrinkage for linear quantile regression")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit the full and sub-model and their shrinkage combinations.
    Fit(Flags),
    /// Asymptotic bias, quadratic bias and risk over a noncentrality grid.
    Curves(Flags),
    /// Monte Carlo experiments: MRME sweep, PMAD table or Wald size.
    Simulate(Flags),
    /// Average prediction error over random train/test splits.
    Ape(Flags),
}

enum Failure {
    Invalid(String),
    Core(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(msg) => f.write_str(msg),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Fit(f) => (Command::Fit, f),
        Sub::Curves(f) => (Command::Curves, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Ape(f) => (Command::Ape, f),
    };
    match run(command, &flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qshrink: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command, flags: &Flags) -> Result<(), Failure> {
    configure_threads()?;
    let mut cfg = config::load(command, flags).map_err(Failure::Invalid)?;
    fs::create_dir_all(&cfg.out)?;
    match command {
        Command::Fit => fit(&mut cfg),
        Command::Curves => curves(&mut cfg),
        Command::Simulate => simulate(&cfg),
        Command::Ape => ape_command(&mut cfg),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("QSHRINK_THREADS") else {
        return Ok(());
    };
    let n = raw
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Invalid(format!("QSHRINK_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Invalid(e.to_string()))
}

fn load_data(cfg: &mut RunConfig) -> Result<Dataset, Failure> {
    let d = &cfg.data;
    let path = d.path.clone().expect("validated");
    let opts = IngestOptions {
        response: d.response.clone().expect("validated"),
        drop_missing: d.drop_missing,
        log_response: d.log_response,
        intercept: d.intercept,
        exclude: d.exclude.clone(),
    };
    let raw = ingest::ingest_csv(&path, &opts)?;
    let sub = match cfg.partition.method {
        PartitionMethod::Explicit => cfg.partition.sub.clone(),
        PartitionMethod::Bic => {
            let criterion = match cfg.partition.criterion {
                BicCriterion::Ls => Criterion::LeastSquares,
                BicCriterion::Quantile => Criterion::Quantile { tau: cfg.tau[0] },
            };
            selection::select_submodel_bic(&raw, criterion)?.selected
        }
    };
    cfg.partition.selected = Some(sub.clone());
    Ok(ingest::partition(&raw, &sub)?)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(out_path(cfg, name), text)?;
    Ok(())
}

fn emit_report(cfg: &RunConfig, stem: &str, mut report: ExperimentReport) -> Result<(), Failure> {
    let experiment = std::mem::take(&mut report.metadata.config);
    report.metadata.config = serde_json::json!({ "run": cfg, "experiment": experiment });
    for f in &cfg.format {
        match f {
            Format::Csv => report.write_csv(BufWriter::new(File::create(out_path(cfg, &format!("{stem}.csv")))?))?,
            Format::Json => {
                let mut text = report.to_json()?;
                text.push('\n');
                fs::write(out_path(cfg, &format!("{stem}.json")), text)?;
            }
            Format::Table => print!("{}", report.to_table()),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateRow {
    estimator: Estimator,
    beta: Vec<f64>,
}

#[derive(Serialize)]
struct FitEntry {
    tau: f64,
    wald: f64,
    critical_value: f64,
    pretest_accepted: bool,
    shrink_factor: Option<f64>,
    positive_part_truncated: bool,
    degenerate: bool,
    estimates: Vec<EstimateRow>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    config: &'a RunConfig,
    n: usize,
    p1: usize,
    p2: usize,
    columns: Vec<String>,
    fits: Vec<FitEntry>,
}

fn fit(cfg: &mut RunConfig) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    if data.p2() == 0 {
        return Err(Failure::Invalid("partition leaves no X₂ columns".into()));
    }
    let mut fits = Vec::new();
    for &tau in &cfg.tau {
        let r = shrinkage::estimate(&data, tau, cfg.alpha)?;
        let estimates = Estimator::ALL
            .into_iter()
            .filter_map(|e| r.full_vector(e).map(|b| EstimateRow { estimator: e, beta: b.as_slice().to_vec() }))
            .collect();
        fits.push(FitEntry {
            tau,
            wald: r.wald,
            critical_value: r.critical_value,
            pretest_accepted: r.pretest_accepted,
            shrink_factor: r.shrink_factor,
            positive_part_truncated: r.positive_part_truncated,
            degenerate: r.degenerate,
            estimates,
        });
    }
    let report =
        FitReport { config: cfg, n: data.n(), p1: data.p1(), p2: data.p2(), columns: data.names().to_vec(), fits };
    for f in &cfg.format {
        match f {
            Format::Csv => {
                let mut text = String::from("tau,estimator,term,estimate\n");
                for e in &report.fits {
                    for row in &e.estimates {
                        for (name, b) in report.columns.iter().zip(&row.beta) {
                            text.push_str(&format!("{},{},{},{}\n", e.tau, row.estimator, csv_field(name), b));
                        }
                    }
                }
                fs::write(out_path(cfg, "fit.csv"), text)?;
            }
            Format::Json => write_json(cfg, "fit.json", &report)?,
            Format::Table => print!("{}", fit_table(&report)),
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fit_table(r: &FitReport) -> String {
    let width = r.columns.iter().map(|c| c.len()).max().unwrap_or(4).max(4);
    let mut out = String::new();
    for e in &r.fits {
        out.push_str(&format!(
            "tau = {}  W = {:.4}  critical = {:.4}  pretest {}\n",
            e.tau,
            e.wald,
            e.critical_value,
            if e.pretest_accepted { "accepts SM" } else { "rejects SM" }
        ));
        out.push_str(&format!("{:width$}", "term"));
        for row in &e.estimates {
            out.push_str(&format!(" {:>12}", row.estimator.as_str()));
        }
        out.push('\n');
        for (j, name) in r.columns.iter().enumerate() {
            out.push_str(&format!("{name:width$}"));
            for row in &e.estimates {
                let v = row.beta[j];
                let v = if v.abs() < 5e-6 { 0.0 } else { v };
                out.push_str(&format!(" {v:>12.5}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct CurveSet {
    tau: f64,
    p1: usize,
    p2: usize,
    rows: Vec<CurveRow>,
}

#[derive(Serialize)]
struct CurvesReport<'a> {
    config: &'a RunConfig,
    curves: Vec<CurveSet>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, Failure> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Failure::Invalid(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn curves(cfg: &mut RunConfig) -> Result<(), Failure> {
    let data = if cfg.curves.gamma.is_none() { Some(load_data(cfg)?) } else { None };
    let c = cfg.curves.clone();
    let steps = (c.delta_max / c.delta_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * c.delta_step).collect();
    let direction = c.direction.as_ref().map(|d| DVector::from_vec(d.clone()));
    let mut sets = Vec::new();
    for &tau in &cfg.tau {
        let blocks = match (&c.gamma, &data) {
            (Some(g), _) => GammaBlocks::from_matrix(&matrix(g, "gamma")?, c.p1.expect("validated"))?,
            (None, Some(d)) => quantreg::gamma_blocks(&quantreg::fit_full(d, tau)?)?,
            (None, None) => unreachable!(),
        };
        let p1 = blocks.p1();
        let p2 = blocks.p2();
        let weight = match &c.weight {
            Some(w) => matrix(w, "weight")?,
            None => DMatrix::identity(p1, p1),
        };
        let inputs = AsymptoticInputs::new(blocks, tau, weight, cfg.alpha)?
            .with_form(c.form)
            .with_noncentrality(c.noncentrality);
        let rows = asymptotics::curves(&inputs, &grid, &asymptotics::available_estimators(p2), direction.as_ref())?;
        sets.push(CurveSet { tau, p1, p2, rows });
    }
    let report = CurvesReport { config: cfg, curves: sets };
    for f in &cfg.format {
        match f {
            Format::Csv => {
                let mut text = String::from("tau,delta,estimator,bias_norm,qb,risk\n");
                for s in &report.curves {
                    for r in &s.rows {
                        text.push_str(&format!("{},{},{},{},{},{}\n", s.tau, r.delta, r.estimator, r.bias_norm, r.qb, r.risk));
                    }
                }
                fs::write(out_path(cfg, "curves.csv"), text)?;
            }
            Format::Json => write_json(cfg, "curves.json", &report)?,
            Format::Table => {
                for s in &report.curves {
                    println!("tau = {}  p1 = {}  p2 = {}", s.tau, s.p1, s.p2);
                    println!("{:>8} {:>4} {:>12} {:>12} {:>12}", "delta", "est", "|bias|", "QB", "risk");
                    for r in &s.rows {
                        println!(
                            "{:>8.3} {:>4} {:>12.5} {:>12.5} {:>12.5}",
                            r.delta,
                            r.estimator.as_str(),
                            r.bias_norm,
                            r.qb,
                            r.risk
                        );
                    }
                }
            }
        }
    }
    Ok(())
}

fn design(cfg: &RunConfig, error: Option<ErrorModel>) -> SimulationConfig {
    let s = &cfg.simulate;
    let reps = cfg.replications.expect("resolved");
    let which = s.design.unwrap_or(match s.experiment {
        Experiment::Pmad => Design::Prediction,
        _ => Design::ModelError,
    });
    let mut sim = match which {
        Design::ModelError => SimulationConfig::model_error_design(reps, cfg.seed),
        Design::Prediction => {
            SimulationConfig::prediction_design(ErrorModel::CauchyMixture { gamma: 0.1 }, reps, cfg.seed)
        }
    };
    if let Some(e) = error.or(s.error) {
        sim.error_model = e;
    }
    match (s.n_train, s.experiment) {
        (Some(n), _) => sim.n_train = n,
        (None, Experiment::Size) => sim.n_train = 500,
        _ => {}
    }
    if let Some(rho) = s.rho {
        sim.rho = rho;
    }
    if let Some(sched) = s.schedule {
        sim.schedule = sched;
    }
    sim.tau_list = cfg.tau.clone();
    sim.alpha = cfg.alpha;
    sim.enet_alpha = cfg.penalty.enet_alpha;
    sim
}

#[derive(Serialize)]
struct SizeRow {
    tau: f64,
    n: usize,
    alpha: f64,
    replications: usize,
    rejection_rate: f64,
}

#[derive(Serialize)]
struct SizeReport<'a> {
    config: &'a RunConfig,
    design: SimulationConfig,
    rows: Vec<SizeRow>,
}

fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    match cfg.simulate.experiment {
        Experiment::Mrme => {
            let sim = design(cfg, None);
            let grid = cfg
                .simulate
                .delta_grid
                .clone()
                .unwrap_or_else(|| (0..=16).map(|k| k as f64 * 0.25).collect());
            emit_report(cfg, "simulate", simlab::mrme_sweep(&sim, &grid)?)
        }
        Experiment::Pmad => {
            let cases = cfg.simulate.cases.clone().unwrap_or_else(|| {
                vec![
                    ErrorModel::CauchyMixture { gamma: 0.1 },
                    ErrorModel::CauchyMixture { gamma: 0.25 },
                    ErrorModel::ContaminatedNormal { gamma: 0.1, variance: 100.0 },
                    ErrorModel::ContaminatedNormal { gamma: 0.25, variance: 100.0 },
                ]
            });
            let reports = cases
                .into_iter()
                .map(|e| simlab::pmad_experiment(&design(cfg, Some(e))))
                .collect::<Result<Vec<_>, _>>()?;
            emit_report(cfg, "simulate", ExperimentReport::merge(reports)?)
        }
        Experiment::Size => {
            let sim = design(cfg, None);
            let rows = cfg
                .tau
                .iter()
                .map(|&tau| {
                    Ok(SizeRow {
                        tau,
                        n: sim.n_train,
                        alpha: sim.alpha,
                        replications: sim.replications,
                        rejection_rate: simlab::wald_rejection_rate(&sim, tau)?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let report = SizeReport { config: cfg, design: sim, rows };
            for f in &cfg.format {
                match f {
                    Format::Csv => {
                        let mut text = String::from("tau,n,alpha,replications,rejection_rate\n");
                        for r in &report.rows {
                            text.push_str(&format!("{},{},{},{},{}\n", r.tau, r.n, r.alpha, r.replications, r.rejection_rate));
                        }
                        fs::write(out_path(cfg, "simulate.csv"), text)?;
                    }
                    Format::Json => write_json(cfg, "simulate.json", &report)?,
                    Format::Table => {
                        for r in &report.rows {
                            println!("tau = {}  n = {}  alpha = {}  rejection rate = {:.4}", r.tau, r.n, r.alpha, r.rejection_rate);
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

fn ape_command(cfg: &mut RunConfig) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let a = &cfg.ape;
    let ape_cfg = ApeConfig {
        tau_list: cfg.tau.clone(),
        splits: a.splits,
        seed: cfg.seed,
        train_fraction: a.train_fraction,
        tuning_fraction: a.tuning_fraction,
        alpha: cfg.alpha,
        enet_alpha: cfg.penalty.enet_alpha,
        methods: a.methods.clone().unwrap_or_else(|| ApeConfig::default().methods),
        label: a.label.clone(),
    };
    emit_report(cfg, "ape", ape::ape_protocol(&data, &ape_cfg)?)
}
