use std::io::Write;
use std::path::Path;

use funflow::bandwidth::{cv_select, BandwidthPlan, CvGrid, ScaleMode};
use funflow::curves::{
    brownian_curve, load_dataset, read_curves, simulate_regression_sample, stream_rng, write_curves, write_responses,
    Dataset,
};
use funflow::estimator::{asymptotic_constants, CdfPolicy, EstimatorConfig, Kernel, PredictionResult, QueryState};
use funflow::experiments::{
    coverage_study, mspe_study, rate_check, timing_benchmark, BandwidthChoice, Design, ExperimentConfig, MspeCell,
    TimingConfig,
};
use funflow::parallel::Execution;
use funflow::seminorms::{FittedSemiNorm, SemiNormSpec};
use funflow::snapshot;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Stream used for the query curve written by `simulate`, disjoint from the
/// sample streams.
const QUERY_STREAM: u64 = u64::MAX;

const DEFAULT_GRID_C: &str = "0.5,1,2,10";
const DEFAULT_GRID_NU: &str = "1/10,1/8,1/6,1/5,1/4,1/3,1/2,1";

type Result<T> = std::result::Result<T, CliError>;

fn io_error(path: &str, e: std::io::Error) -> CliError {
    CliError::Core(funflow::Error::io(path, e))
}

/// Writes `header` and the table produced by `body` to `out` or stdout.
fn emit_table(
    cfg: &RunConfig,
    command: &str,
    extra: &[String],
    body: impl FnOnce(&mut Vec<u8>) -> funflow::Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    let out = cfg.raw("out");
    let mut text = cfg.header(command);
    text.push('\n');
    for line in extra {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    let mut bytes = text.into_bytes();
    bytes.extend(buf);
    match out {
        Some(path) => std::fs::write(&path, bytes).map_err(|e| io_error(&path, e)),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|e| io_error("<stdout>", e)),
    }
}

fn emit_json(cfg: &RunConfig, mut value: Value) {
    value["config"] = json!(cfg.resolved());
    println!("{value}");
}

fn training_data(cfg: &RunConfig) -> Result<Dataset> {
    let curves: String = cfg.require("curves")?;
    let responses: String = cfg
        .raw("responses")
        .ok_or_else(|| CliError::Usage("a responses file is required (--responses)".into()))?;
    Ok(load_dataset(&curves, Some(Path::new(&responses)))?)
}

fn estimator_settings(cfg: &RunConfig) -> Result<(f64, Kernel, SemiNormSpec)> {
    Ok((
        cfg.get("l", 0.0)?,
        cfg.get("kernel", Kernel::quadratic())?,
        cfg.get("seminorm", SemiNormSpec::pca(3))?,
    ))
}

fn grid(cfg: &RunConfig) -> Result<CvGrid> {
    let grid = CvGrid {
        c_values: cfg.list("grid_C", DEFAULT_GRID_C)?,
        nu_values: cfg.list("grid_nu", DEFAULT_GRID_NU)?,
    };
    grid.validate()?;
    Ok(grid)
}

fn prediction_json(r: &PredictionResult) -> Value {
    json!({
        "estimate": r.estimate,
        "ci_low": r.ci_low,
        "ci_high": r.ci_high,
        "diagnostics": r.diagnostics,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let n: usize = cfg.get("n", 100)?;
    let p: usize = cfg.get("p", 100)?;
    let noise: f64 = cfg.get("noise", 0.1)?;
    let seed: u64 = cfg.get("seed", 1)?;
    let dir: String = cfg.get("out", ".".to_string())?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Usage(format!("noise must be a nonnegative number, got {noise}")));
    }
    let data = simulate_regression_sample(n, p, noise, seed)?;
    let query = brownian_curve(data.grid(), &mut stream_rng(seed, QUERY_STREAM));
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let dir = Path::new(&dir);
    let files = [dir.join("curves.csv"), dir.join("responses.csv"), dir.join("query.csv")];
    write_curves(&files[0], data.curves())?;
    write_responses(&files[1], data.responses().expect("simulated data has responses"))?;
    write_curves(&files[2], std::slice::from_ref(&query))?;
    emit_json(
        cfg,
        json!({
            "command": "simulate",
            "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        }),
    );
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let data = training_data(cfg)?;
    let query_path: String = cfg.require("query")?;
    let (_, queries) = read_curves(&query_path)?;
    let (ell, kernel, spec) = estimator_settings(cfg)?;
    let alpha: Option<f64> = cfg.opt("alpha")?;
    let snapshot_path = cfg.raw("snapshot");
    if snapshot_path.is_some() && queries.len() != 1 {
        return Err(CliError::Usage(format!(
            "--snapshot needs exactly one query curve, got {}",
            queries.len()
        )));
    }
    let (c, nu) = if cfg.flag("cv")? {
        cv_select(&data, &grid(cfg)?, ell, kernel, spec)?.selected
    } else {
        (cfg.get("C", 1.0)?, cfg.get("nu", 0.1)?)
    };
    let config = EstimatorConfig {
        ell,
        kernel,
        plan: BandwidthPlan::new(c, nu, ScaleMode::Sample)?,
        policy: CdfPolicy::Frozen,
    };
    let seminorm = FittedSemiNorm::fit(spec, &data)?;
    for (k, q) in queries.iter().enumerate() {
        let state = QueryState::init(q, &data, config.clone(), seminorm.clone())?;
        let result = state.prediction(alpha)?;
        if let Some(path) = &snapshot_path {
            snapshot::save(&state, path)?;
        }
        let mut v = prediction_json(&result);
        v["query"] = json!(k);
        v["C"] = json!(c);
        v["nu"] = json!(nu);
        emit_json(cfg, v);
    }
    Ok(())
}

pub fn update(cfg: &RunConfig) -> Result<()> {
    let path: String = cfg.require("snapshot")?;
    let mut state = snapshot::load(&path)?;
    let data = training_data(cfg)?;
    let alpha: Option<f64> = cfg.opt("alpha")?;
    let y = data.require_responses("update")?;
    for (x, &yi) in data.curves().iter().zip(y) {
        state.update(x, yi)?;
    }
    let out = cfg.raw("out").unwrap_or_else(|| path.clone());
    snapshot::save(&state, &out)?;
    let mut v = prediction_json(&state.prediction(alpha)?);
    v["added"] = json!(data.len());
    v["snapshot"] = json!(out);
    emit_json(cfg, v);
    Ok(())
}

pub fn cv(cfg: &RunConfig) -> Result<()> {
    let data = training_data(cfg)?;
    let (ell, kernel, spec) = estimator_settings(cfg)?;
    let report = cv_select(&data, &grid(cfg)?, ell, kernel, spec)?;
    let (c, nu) = report.selected;
    emit_table(cfg, "cv", &[format!("selected C={c} nu={nu}")], |w| report.write_csv(w))
}

pub fn constants(cfg: &RunConfig) -> Result<()> {
    let kernel: Kernel = cfg.get("kernel", Kernel::quadratic())?;
    let kappa: f64 = cfg.require("kappa")?;
    let c = asymptotic_constants(kernel, kappa)?;
    let mut rows = vec![
        ("kappa".to_string(), kappa),
        ("M0".into(), c.m0),
        ("M1".into(), c.m1),
        ("M2".into(), c.m2),
    ];
    if let Some(delta) = cfg.opt::<f64>("delta")? {
        for r in cfg.list::<f64>("r", "1")? {
            rows.push((format!("beta[{r}]"), c.beta(r, delta)?));
        }
        for ell in cfg.list::<f64>("l", "0")? {
            rows.push((format!("alpha[{ell}]"), c.alpha(ell, delta)?));
        }
    }
    emit_table(cfg, "constants", &[], |w| {
        writeln!(w, "name,value").expect("write to memory");
        for (name, v) in &rows {
            writeln!(w, "{name},{v}").expect("write to memory");
        }
        Ok(())
    })
}

fn parse_design(s: &str) -> Result<Design> {
    match s.trim().to_ascii_lowercase().as_str() {
        "brownian" => Ok(Design::Brownian),
        other => other
            .strip_prefix("cube:")
            .and_then(|d| d.parse().ok())
            .map(|dims| Design::Cube { dims })
            .ok_or_else(|| CliError::Usage(format!("design must be brownian or cube:k, got {s:?}"))),
    }
}

fn experiment_config(cfg: &RunConfig, force_cv: bool) -> Result<ExperimentConfig> {
    let design = parse_design(&cfg.get("design", "brownian".to_string())?)?;
    let (ell, kernel, _) = estimator_settings(cfg)?;
    let default_seminorm = design.natural_seminorm().unwrap_or(SemiNormSpec::pca(3));
    let bandwidth = if force_cv || cfg.flag("cv")? {
        BandwidthChoice::Cv { grid: grid(cfg)? }
    } else {
        BandwidthChoice::Fixed {
            c: cfg.get("C", 1.0)?,
            nu: cfg.get("nu", 0.1)?,
        }
    };
    let out = ExperimentConfig {
        design,
        n: cfg.get("n", 100)?,
        p: cfg.get("p", 100)?,
        noise_sd: cfg.get("noise", 0.1)?,
        replications: cfg.get("reps", 500)?,
        seed: cfg.get("seed", 1)?,
        ell,
        kernel,
        seminorm: cfg.get("seminorm", default_seminorm)?,
        bandwidth,
        execution: Execution::Parallel,
        ..ExperimentConfig::default()
    };
    out.validate()?;
    Ok(out)
}

pub fn experiment(cfg: &RunConfig) -> Result<()> {
    let study: String = cfg.require("study")?;
    match study.as_str() {
        "table1" => {
            let ecfg = experiment_config(cfg, false)?;
            let cells: Vec<MspeCell> = cfg
                .list::<usize>("ns", "100,200,500")?
                .into_iter()
                .map(|n| MspeCell::from_config(&ecfg, n))
                .collect();
            let report = mspe_study(&ecfg, &cells)?;
            emit_table(cfg, "experiment", &[], |w| report.write_summary_csv(w))
        }
        "table3" => {
            let ecfg = experiment_config(cfg, false)?;
            let cells: Vec<MspeCell> = cfg
                .list::<f64>("ells", "0,0.25,0.5,0.75,1")?
                .into_iter()
                .map(|ell| MspeCell {
                    label: format!("l={ell}"),
                    ell,
                    ..MspeCell::from_config(&ecfg, ecfg.n)
                })
                .collect();
            let report = mspe_study(&ecfg, &cells)?;
            emit_table(cfg, "experiment", &[], |w| report.write_summary_csv(w))
        }
        "cv" => {
            let ecfg = experiment_config(cfg, true)?;
            let report = mspe_study(&ecfg, &[MspeCell::from_config(&ecfg, ecfg.n)])?;
            let s = &report.summaries()[0];
            let counts = report.selection_counts(0);
            let extra = [format!("mspe={} fitted={} failed={}", s.mspe, s.fitted, s.failed)];
            emit_table(cfg, "experiment", &extra, |w| {
                writeln!(w, "C,nu,count").expect("write to memory");
                for ((c, nu), k) in &counts {
                    writeln!(w, "{c},{nu},{k}").expect("write to memory");
                }
                Ok(())
            })
        }
        "coverage" => {
            let ecfg = experiment_config(cfg, false)?;
            let alpha: f64 = cfg.get("alpha", 0.05)?;
            let report = coverage_study(&ecfg, alpha)?;
            let (m, sd, skew, kurt) = report.pivot_moments();
            let extra = [format!(
                "coverage={} excluded={} pivot_mean={m} pivot_sd={sd} pivot_skewness={skew} pivot_excess_kurtosis={kurt}",
                report.coverage(),
                report.excluded()
            )];
            emit_table(cfg, "experiment", &extra, |w| report.write_csv(w))
        }
        "rate" => {
            let ecfg = experiment_config(cfg, false)?;
            let ns: Vec<usize> = cfg.list("ns", "100,200,500,1000")?;
            let report = rate_check(&ns, &ecfg)?;
            let extra = [format!(
                "slope={} kappa_hat={} target_slope={}",
                report.slope,
                report.kappa_hat,
                report.target_slope()
            )];
            emit_table(cfg, "experiment", &extra, |w| report.write_csv(w))
        }
        other => Err(CliError::Usage(format!(
            "unknown study {other:?}; expected table1, table3, cv, coverage or rate"
        ))),
    }
}

pub fn bench(cfg: &RunConfig) -> Result<()> {
    let big_n: usize = cfg.get("N", 200)?;
    let default_checkpoints: Vec<String> = [1, 50, 100, 200, 500, 1000]
        .iter()
        .filter(|&&k| k < big_n)
        .chain(std::iter::once(&big_n))
        .map(|k| k.to_string())
        .collect();
    let timing = TimingConfig {
        n0: cfg.get("n0", 100)?,
        checkpoints: cfg.list("checkpoints", &default_checkpoints.join(","))?,
        repeats: cfg.get("repeats", 3)?,
        grid: grid(cfg)?,
        ..TimingConfig::default()
    };
    let (ell, kernel, seminorm) = estimator_settings(cfg)?;
    let ecfg = ExperimentConfig {
        p: cfg.get("p", 100)?,
        seed: cfg.get("seed", 1)?,
        ell,
        kernel,
        seminorm,
        bandwidth: BandwidthChoice::Fixed {
            c: cfg.get("C", 1.0)?,
            nu: cfg.get("nu", 0.1)?,
        },
        ..ExperimentConfig::default()
    };
    let report = timing_benchmark(&ecfg, &timing)?;
    let last = report.rows.last().expect("at least one checkpoint");
    eprintln!(
        "recursive/batch time ratio at N={}: {:.3e}",
        last.added,
        last.recursive_secs / last.batch_secs
    );
    if let (Some(r), Some(b)) = (report.recursive_slope, report.batch_slope) {
        eprintln!("growth exponents: recursive {r:.3}, batch {b:.3}");
    }
    emit_table(cfg, "bench", &[], |w| report.write_csv(w))
}
