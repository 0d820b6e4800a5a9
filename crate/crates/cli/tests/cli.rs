use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qshrink(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qshrink"));
    cmd.args(args).current_dir(dir).env_remove("QSHRINK_THREADS");
    if let Some(t) = threads {
        cmd.env("QSHRINK_THREADS", t);
    }
    cmd.output().expect("spawn qshrink")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Deterministic LCG so the fixture does not depend on an RNG crate.
fn fixture(dir: &Path, name: &str, zero_tail: bool, collinear: bool) -> PathBuf {
    let mut state: u64 = 12345;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut text = String::from("y,a,b,c,d,e,group\n");
    for i in 0..60 {
        let a = next() * 4.0;
        let b = next() * 4.0;
        let c = if collinear { 2.0 * a } else { next() * 4.0 };
        let (d, e) = if zero_tail { (0.0, 0.0) } else { (next() * 4.0, next() * 4.0) };
        let y = 1.0 + a - 0.5 * b + next();
        let g = ["north", "south", "west"][i % 3];
        text.push_str(&format!("{y},{a},{b},{c},{d},{e},{g}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn fit_writes_reports_with_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "d.csv", false, false);
    let o = qshrink(
        &["fit", "--data", data.to_str().unwrap(), "--response", "y", "--sub", "a,b", "--out", "out"],
        tmp.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "out/fit.csv");
    assert!(csv.starts_with("tau,estimator,term,estimate\n"));
    // 5 estimators x 8 terms (intercept, a, b, c, d, e, group_south, group_west)
    assert_eq!(csv.lines().count(), 1 + 5 * 8);
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "out/fit.json")).unwrap();
    assert_eq!(json["config"]["command"], "fit");
    assert_eq!(json["config"]["partition"]["selected"], serde_json::json!(["a", "b"]));
    assert_eq!(json["p1"], 3);
    assert_eq!(json["fits"][0]["estimates"].as_array().unwrap().len(), 5);
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path(), "d.csv", false, false);
    fs::write(
        tmp.path().join("run.toml"),
        "tau = 0.25\nalpha = 0.1\nformat = [\"json\"]\n[data]\npath = \"d.csv\"\nresponse = \"y\"\n[partition]\nsub = [\"a\"]\n",
    )
    .unwrap();
    let o = qshrink(&["fit", "--config", "run.toml", "--tau", "0.75", "--out", "o"], tmp.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/fit.json")).unwrap();
    assert_eq!(json["config"]["tau"], serde_json::json!([0.75]));
    assert_eq!(json["config"]["alpha"], 0.1);
    assert_eq!(json["fits"][0]["tau"], 0.75);
    assert!(!tmp.path().join("o/fit.csv").exists());
}

#[test]
fn fit_is_byte_stable() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "d.csv", false, false);
    let args = |out: &'static str| {
        vec!["fit", "--data", data.to_str().unwrap(), "--response", "y", "--sub", "a", "--tau", "0.25,0.5", "--out", out]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    for out in ["r1", "r2"] {
        let a = args(out);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(code(&qshrink(&refs, tmp.path(), None)), 0);
    }
    assert_eq!(read(tmp.path(), "r1/fit.csv"), read(tmp.path(), "r2/fit.csv"));
    let strip = |s: String| s.replace("\"r1\"", "").replace("\"r2\"", "");
    assert_eq!(strip(read(tmp.path(), "r1/fit.json")), strip(read(tmp.path(), "r2/fit.json")));
}

#[test]
fn zero_candidate_block_gives_sub_model() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "z.csv", true, false);
    let o = qshrink(
        &["fit", "--data", data.to_str().unwrap(), "--response", "y", "--sub", "a,b,c,group_south,group_west", "--format", "json", "--out", "o"],
        tmp.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/fit.json")).unwrap();
    let est = json["fits"][0]["estimates"].as_array().unwrap();
    let beta = |k: usize| -> Vec<f64> {
        est[k]["beta"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    let (fm, sm) = (beta(0), beta(1));
    assert_eq!(est[1]["estimator"], "SM");
    let diff = fm.iter().zip(&sm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-4, "{diff}");
}

#[test]
fn validation_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "d.csv", false, false);
    let d = data.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["fit", "--data", d, "--response", "y", "--sub", "nope"],
        vec!["fit", "--data", d, "--response", "missing"],
        vec!["fit", "--data", d, "--response", "y", "--tau", "1.5"],
        vec!["fit", "--data", "absent.csv", "--response", "y"],
        vec!["fit", "--response", "y"],
        vec!["ape", "--data", d, "--response", "y", "--sub", "a", "--splits", "0"],
        vec!["fit", "--bogus-flag"],
    ];
    for args in cases {
        let o = qshrink(&args, tmp.path(), None);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = qshrink(&["simulate", "--replications", "2"], tmp.path(), Some("zero"));
    assert_eq!(code(&o), 2);
    fs::write(tmp.path().join("bad.toml"), "unknown_key = 1\n").unwrap();
    assert_eq!(code(&qshrink(&["simulate", "--config", "bad.toml"], tmp.path(), None)), 2);
}

#[test]
fn singular_design_exits_three() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "c.csv", false, true);
    let o = qshrink(&["fit", "--data", data.to_str().unwrap(), "--response", "y", "--sub", "a"], tmp.path(), None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn curves_from_explicit_gamma() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "[curves]\ngamma = [[2,0,0,1,0,0],[0,2,0,0,1,0],[0,0,2,0,0,1],[1,0,0,2,0,0],[0,1,0,0,2,0],[0,0,1,0,0,2]]\np1 = 3\ndelta_max = 5\ndelta_step = 1\n",
    )
    .unwrap();
    let o = qshrink(&["curves", "--config", "c.toml", "--out", "o"], tmp.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "o/curves.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tau,delta,estimator,bias_norm,qb,risk");
    assert_eq!(lines.len(), 1 + 6 * 5);
    assert!(lines[1].starts_with("0.5,0,FM,0,0,"));
}

#[test]
fn curves_from_data() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "d.csv", false, false);
    let o = qshrink(
        &["curves", "--data", data.to_str().unwrap(), "--response", "y", "--sub", "a,b", "--delta-max", "2", "--format", "json", "--out", "o"],
        tmp.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/curves.json")).unwrap();
    assert_eq!(json["curves"][0]["p1"], 3);
    assert_eq!(json["curves"][0]["p2"], 5);
}

#[test]
fn simulation_ignores_thread_count() {
    let tmp = TempDir::new().unwrap();
    let run = |out: &str, threads: &str| {
        let o = qshrink(
            &["simulate", "--experiment", "mrme", "--replications", "12", "--seed", "7", "--format", "csv", "--out", out],
            tmp.path(),
            Some(threads),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        read(tmp.path(), &format!("{out}/simulate.csv"))
    };
    let one = run("t1", "1");
    assert_eq!(one, run("t4", "4"));
    assert!(one.starts_with("delta_star,estimator,mrme\n"));
}

#[test]
fn wald_size_report() {
    let tmp = TempDir::new().unwrap();
    let o = qshrink(
        &["simulate", "--experiment", "size", "--replications", "20", "--format", "json", "--out", "o"],
        tmp.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/simulate.json")).unwrap();
    assert_eq!(json["rows"][0]["n"], 500);
    let rate = json["rows"][0]["rejection_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn pmad_report_has_table_columns() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("p.toml"),
        "replications = 3\ntau = [0.5]\n[simulate]\nexperiment = \"pmad\"\ncases = [{ kind = \"cauchy_mixture\", gamma = 0.1 }]\n",
    )
    .unwrap();
    let o = qshrink(&["simulate", "--config", "p.toml", "--format", "csv", "--out", "o"], tmp.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "o/simulate.csv");
    assert!(csv.starts_with("tau,estimator,case,gamma,mean,se\n"));
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn ape_with_bic_partition() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path(), "d.csv", false, false);
    let o = qshrink(
        &["ape", "--data", data.to_str().unwrap(), "--response", "y", "--partition", "bic", "--splits", "3", "--out", "o"],
        tmp.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "o/ape.csv");
    assert!(csv.starts_with("tau,estimator,case,gamma,mean,se\n"));
    assert_eq!(csv.lines().count(), 1 + 8);
    let json: serde_json::Value = serde_json::from_str(&read(tmp.path(), "o/ape.json")).unwrap();
    let selected = json["metadata"]["config"]["run"]["partition"]["selected"].as_array().unwrap();
    assert_eq!(selected[0], "a");
}
