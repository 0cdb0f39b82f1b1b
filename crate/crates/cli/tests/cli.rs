use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use funflow::curves::{load_dataset, read_curves, write_curves, write_responses, Curve, Dataset};
use funflow::estimator::{EstimatorConfig, QueryState, SortedDistances};
use funflow::seminorms::{FittedSemiNorm, SemiNormSpec};
use serde_json::Value;
use tempfile::TempDir;

fn funflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funflow"))
        .args(args)
        .env_remove("FUNFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = funflow(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(stdout: &str) -> Vec<Value> {
    stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// Data rows of a CSV produced by the CLI, without the `#` header lines.
fn table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn simulate(dir: &Path, n: usize, p: usize, seed: u64) {
    ok(&[
        "simulate",
        "--n",
        &n.to_string(),
        "--p",
        &p.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        &dir.display().to_string(),
    ]);
}

fn write_data(dir: &Path, name: &str, data: &Dataset) -> (String, String) {
    let c = path(dir, &format!("{name}_curves.csv"));
    let r = path(dir, &format!("{name}_responses.csv"));
    write_curves(&c, data.curves()).unwrap();
    write_responses(&r, data.responses().unwrap()).unwrap();
    (c, r)
}

fn split(data: &Dataset, at: usize) -> (Dataset, Dataset) {
    let y = data.responses().unwrap();
    (
        Dataset::new(data.curves()[..at].to_vec(), Some(y[..at].to_vec())).unwrap(),
        Dataset::new(data.curves()[at..].to_vec(), Some(y[at..].to_vec())).unwrap(),
    )
}

#[test]
fn simulate_writes_deterministic_files() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    simulate(a.path(), 100, 100, 7);
    simulate(b.path(), 100, 100, 7);
    let data = load_dataset(a.path().join("curves.csv"), Some(&a.path().join("responses.csv"))).unwrap();
    assert_eq!(data.len(), 100);
    assert_eq!(data.grid().len(), 100);
    for f in ["curves.csv", "responses.csv", "query.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn invalid_noise_is_a_usage_error() {
    let out = funflow(&["simulate", "--noise", "-1", "--out", "/nonexistent/never"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[E_USAGE]"));
}

#[test]
fn constant_responses_are_predicted_exactly() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 50, 30, 3);
    let data = load_dataset(dir.path().join("curves.csv"), None).unwrap();
    let constant = Dataset::new(data.curves().to_vec(), Some(vec![2.5; 50])).unwrap();
    let (c, r) = write_data(dir.path(), "const", &constant);
    let q = path(dir.path(), "query.csv");
    let out = json_lines(&ok(&["predict", "--curves", &c, "--responses", &r, "--query", &q]));
    assert_eq!(out.len(), 1);
    assert!((out[0]["estimate"].as_f64().unwrap() - 2.5).abs() < 1e-12);
}

#[test]
fn band_matches_the_library() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 80, 40, 11);
    let (c, r, q) = (
        path(dir.path(), "curves.csv"),
        path(dir.path(), "responses.csv"),
        path(dir.path(), "query.csv"),
    );
    let out = json_lines(&ok(&[
        "predict", "--curves", &c, "--responses", &r, "--query", &q, "--l", "0", "--alpha", "0.05",
    ]));
    let data = load_dataset(&c, Some(Path::new(&r))).unwrap();
    let query = read_curves(&q).unwrap().1.remove(0);
    let sn = FittedSemiNorm::fit(SemiNormSpec::pca(3), &data).unwrap();
    let band = QueryState::init(&query, &data, EstimatorConfig::default(), sn)
        .unwrap()
        .confidence_band(0.05)
        .unwrap();
    assert_eq!(out[0]["ci_low"].as_f64().unwrap(), band.low);
    assert_eq!(out[0]["ci_high"].as_f64().unwrap(), band.high);
    assert_eq!(out[0]["config"]["alpha"], "0.05");
}

#[test]
fn missing_responses_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 20, 20, 1);
    let out = funflow(&[
        "predict",
        "--curves",
        &path(dir.path(), "curves.csv"),
        "--query",
        &path(dir.path(), "query.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_USAGE"));
}

#[test]
fn empty_neighborhood_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 30, 20, 2);
    let data = load_dataset(dir.path().join("curves.csv"), Some(&dir.path().join("responses.csv"))).unwrap();
    let far: Vec<Curve> = vec![data.curves()[0].scale(1e6)];
    let q = path(dir.path(), "far.csv");
    write_curves(&q, &far).unwrap();
    let out = funflow(&[
        "predict",
        "--curves",
        &path(dir.path(), "curves.csv"),
        "--responses",
        &path(dir.path(), "responses.csv"),
        "--query",
        &q,
        "--C",
        "0.01",
        "--nu",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_EMPTY_NEIGHBORHOOD"));
}

#[test]
fn update_matches_a_refit_with_the_frozen_reference() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 60, 30, 5);
    let data = load_dataset(dir.path().join("curves.csv"), Some(&dir.path().join("responses.csv"))).unwrap();
    let (initial, arrivals) = split(&data, 50);
    let (ic, ir) = write_data(dir.path(), "initial", &initial);
    let (ac, ar) = write_data(dir.path(), "arrivals", &arrivals);
    let q = path(dir.path(), "query.csv");
    let snap = path(dir.path(), "state.json");
    ok(&["predict", "--curves", &ic, "--responses", &ir, "--query", &q, "--l", "0.5", "--snapshot", &snap]);
    let out = json_lines(&ok(&["update", "--snapshot", &snap, "--curves", &ac, "--responses", &ar]));
    let got = out[0]["estimate"].as_f64().unwrap();
    assert_eq!(out[0]["diagnostics"]["n"], 60);

    // Direct evaluation over all 60 observations with F̂ and S from the first 50.
    let query = read_curves(&q).unwrap().1.remove(0);
    let sn = FittedSemiNorm::fit(SemiNormSpec::pca(3), &initial).unwrap();
    let d: Vec<f64> = data.curves().iter().map(|x| sn.distance(&query, x).unwrap()).collect();
    let reference = SortedDistances::from_unsorted(d[..50].to_vec());
    let s = d[..50].iter().cloned().fold(0.0, f64::max);
    let y = data.responses().unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..60 {
        let h = s * ((i + 1) as f64).powf(-0.1);
        let u = d[i] / h;
        if u < 1.0 {
            let k = (1.0 - u * u) / reference.cdf(h).sqrt();
            num += y[i] * k;
            den += k;
        }
    }
    assert!((got - num / den).abs() <= 1e-12 * (num / den).abs());
}

#[test]
fn out_of_support_update_changes_nothing() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 40, 30, 8);
    let data = load_dataset(dir.path().join("curves.csv"), Some(&dir.path().join("responses.csv"))).unwrap();
    let (c, r) = (path(dir.path(), "curves.csv"), path(dir.path(), "responses.csv"));
    let q = path(dir.path(), "query.csv");
    let snap = path(dir.path(), "state.json");
    let before = json_lines(&ok(&["predict", "--curves", &c, "--responses", &r, "--query", &q, "--snapshot", &snap]));
    let far = Dataset::new(vec![data.curves()[0].scale(1e4)], Some(vec![1e9])).unwrap();
    let (fc, fr) = write_data(dir.path(), "far", &far);
    let after = json_lines(&ok(&["update", "--snapshot", &snap, "--curves", &fc, "--responses", &fr]));
    assert_eq!(before[0]["estimate"], after[0]["estimate"]);
    assert_eq!(after[0]["diagnostics"]["n"], 41);
}

#[test]
fn damaged_snapshots_are_rejected() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 30, 20, 4);
    let (c, r, q) = (
        path(dir.path(), "curves.csv"),
        path(dir.path(), "responses.csv"),
        path(dir.path(), "query.csv"),
    );
    let snap = path(dir.path(), "state.json");
    ok(&["predict", "--curves", &c, "--responses", &r, "--query", &q, "--snapshot", &snap]);
    let text = std::fs::read_to_string(&snap).unwrap();
    let run = |contents: String| {
        let p = path(dir.path(), "bad.json");
        std::fs::write(&p, contents).unwrap();
        funflow(&["update", "--snapshot", &p, "--curves", &c, "--responses", &r])
    };

    let mut env: Value = serde_json::from_str(&text).unwrap();
    let payload = env["payload"].as_str().unwrap().replacen("\"ell\":0.0", "\"ell\":0.5", 1);
    env["payload"] = Value::String(payload);
    let tampered = run(env.to_string());
    assert_eq!(tampered.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&tampered.stderr).contains("E_INTEGRITY"));

    let mut env: Value = serde_json::from_str(&text).unwrap();
    env["version"] = Value::from(99);
    let versioned = run(env.to_string());
    assert!(String::from_utf8_lossy(&versioned.stderr).contains("E_SNAPSHOT_VERSION"));

    let truncated = run(text[..text.len() / 2].to_string());
    assert!(!truncated.status.success());
}

#[test]
fn constants_for_quadratic_kernel() {
    let rows = table(&ok(&["constants", "--kernel", "quadratic", "--kappa", "2"]));
    let value = |name: &str| -> f64 {
        rows.iter().find(|r| r[0] == name).unwrap()[1].parse().unwrap()
    };
    assert!((value("M0") - 4.0 / 15.0).abs() < 1e-10);
    assert!((value("M1") - 0.5).abs() < 1e-10);
    assert!((value("M2") - 1.0 / 3.0).abs() < 1e-10);
    let out = funflow(&["constants", "--kappa", "2", "--delta", "0.5", "--r", "1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_DIVERGENCE"));
}

#[test]
fn cv_on_constant_responses_uses_the_tie_rule() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), 40, 30, 6);
    let data = load_dataset(dir.path().join("curves.csv"), None).unwrap();
    let constant = Dataset::new(data.curves().to_vec(), Some(vec![1.0; 40])).unwrap();
    let (c, r) = write_data(dir.path(), "const", &constant);
    let text = ok(&["cv", "--curves", &c, "--responses", &r]);
    assert!(text.contains("# selected C=0.5 nu=0.1\n"));
    let rows = table(&text);
    assert_eq!(rows[0], ["C", "nu", "score", "skipped", "flagged"]);
    assert_eq!(rows.len(), 1 + 32);
}

#[test]
fn bench_reports_two_timing_columns() {
    let out = funflow(&["bench", "--n0", "20", "--N", "30", "--p", "20", "--repeats", "1", "--grid-C", "1", "--grid-nu", "0.1,0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = table(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0], ["N", "recursive_secs", "batch_secs"]);
    assert_eq!(rows.iter().skip(1).map(|r| r[0].as_str()).collect::<Vec<_>>(), ["1", "30"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ratio at N=30"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg: PathBuf = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# constants\nkernel = uniform\nkappa = 1\n").unwrap();
    let cfg = cfg.display().to_string();
    let text = ok(&["constants", "--config", &cfg]);
    assert!(text.starts_with("# funflow constants kappa=1 kernel=uniform"));
    assert!(table(&text).iter().any(|r| r == &["M0", "0.5"]));
    let text = ok(&["constants", "--config", &cfg, "--kernel", "quadratic"]);
    assert!(text.contains("kernel=quadratic"));

    std::fs::write(dir.path().join("bad.cfg"), "kernel = uniform\nbandwith = 2\n").unwrap();
    let out = funflow(&["constants", "--config", &path(dir.path(), "bad.cfg")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key \"bandwith\""));
}

#[test]
fn experiments_do_not_depend_on_thread_count() {
    let args = ["experiment", "--study", "table1", "--reps", "16", "--ns", "30,60", "--p", "20"];
    let run = |threads: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_funflow"));
        cmd.args(args);
        match threads {
            Some(t) => cmd.env("FUNFLOW_THREADS", t),
            None => cmd.env_remove("FUNFLOW_THREADS"),
        };
        cmd.output().unwrap()
    };
    let one = run(Some("1"));
    let many = run(Some("4"));
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
    assert_eq!(table(&String::from_utf8(one.stdout).unwrap()).len(), 3);
    let bad = run(Some("zero"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn coverage_and_rate_studies_run() {
    let text = ok(&[
        "experiment", "--study", "coverage", "--design", "cube:1", "--n", "100", "--p", "20", "--reps", "20", "--C", "0.5",
        "--nu", "1/3",
    ]);
    assert!(text.contains("# coverage="));
    assert_eq!(table(&text).len(), 21);
    let text = ok(&["experiment", "--study", "rate", "--ns", "20,40,80", "--p", "20", "--reps", "8"]);
    assert!(text.contains("slope="));
    let out = funflow(&["experiment", "--study", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
