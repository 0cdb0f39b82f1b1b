//! Cumulative cost of keeping a prediction current as observations arrive.
//!
//! Both arms start from the same `n0` observations and see the same stream.
//! The recursive arm adds each arrival to its accumulators and predicts. The
//! refit arm recomputes everything from the full sample: coordinates of every
//! curve, the pairwise distances, a leave-one-out choice of `(C, ν)` for the
//! fixed-bandwidth estimator, and the prediction.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{draw_replication, BandwidthChoice, ExperimentConfig};
use crate::bandwidth::{cv_from_distances, BandwidthPlan, CvGrid, CvProfile, DistanceMatrix, ScaleMode};
use crate::curves::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{batch_estimate_distances, CdfPolicy, EstimatorConfig, QueryState};
use crate::parallel::Execution;
use crate::seminorms::{coordinate_distance, FittedSemiNorm};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub n0: usize,
    /// Numbers of appended observations at which cumulative times are read.
    pub checkpoints: Vec<usize>,
    /// Each arm runs this many times; the median per checkpoint is kept.
    pub repeats: usize,
    /// Grid searched by the refit arm at every arrival.
    pub grid: CvGrid,
    /// Growth exponents are fitted on checkpoints at or above this value.
    pub slope_from: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            n0: 100,
            checkpoints: vec![1, 50, 100, 200, 500],
            repeats: 3,
            grid: CvGrid::default(),
            slope_from: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub added: usize,
    pub recursive_secs: f64,
    pub batch_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub n0: usize,
    pub rows: Vec<TimingRow>,
    pub recursive_slope: Option<f64>,
    pub batch_slope: Option<f64>,
}

impl TimingReport {
    /// `recursive / batch` at `added` observations.
    pub fn ratio_at(&self, added: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.added == added)
            .map(|r| r.recursive_secs / r.batch_secs)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "recursive_secs", "batch_secs"])?;
        for r in &self.rows {
            w.write_record([r.added.to_string(), r.recursive_secs.to_string(), r.batch_secs.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn timing_benchmark(cfg: &ExperimentConfig, timing: &TimingConfig) -> Result<TimingReport> {
    cfg.validate()?;
    timing.grid.validate()?;
    if timing.n0 < 3 {
        return Err(Error::InvalidArgument("the initial sample needs at least 3 observations".into()));
    }
    if timing.checkpoints.is_empty() || timing.repeats == 0 {
        return Err(Error::InvalidArgument("no checkpoints or repeats requested".into()));
    }
    let mut checkpoints = timing.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let added = *checkpoints.last().expect("nonempty");
    let draw = draw_replication(cfg, 0, timing.n0 + added)?;
    let initial = draw.train.prefix(timing.n0)?;
    let seminorm = FittedSemiNorm::fit(cfg.seminorm, &initial)?;
    let (c, nu) = match &cfg.bandwidth {
        BandwidthChoice::Fixed { c, nu } => (*c, *nu),
        BandwidthChoice::Cv { grid } => {
            let y = initial.require_responses("timing")?;
            let dist = DistanceMatrix::new(&seminorm, &initial)?;
            cv_from_distances(&dist, y, grid, cfg.ell, cfg.kernel, CvProfile::Recursive, Execution::Sequential)?
                .selected
        }
    };
    let config = EstimatorConfig {
        ell: cfg.ell,
        kernel: cfg.kernel,
        plan: BandwidthPlan::new(c, nu, ScaleMode::Sample)?,
        policy: CdfPolicy::Frozen,
    };

    let mut rec_runs = Vec::with_capacity(timing.repeats);
    let mut batch_runs = Vec::with_capacity(timing.repeats);
    for _ in 0..timing.repeats {
        rec_runs.push(recursive_arm(&draw.query, &initial, &draw.train, &config, &seminorm, &checkpoints)?);
        batch_runs.push(refit_arm(cfg, timing, &draw, &seminorm, &checkpoints)?);
    }
    let median = |runs: &[Vec<f64>], k: usize| {
        let mut v: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let rows: Vec<TimingRow> = checkpoints
        .iter()
        .enumerate()
        .map(|(k, &n)| TimingRow {
            added: n,
            recursive_secs: median(&rec_runs, k),
            batch_secs: median(&batch_runs, k),
        })
        .collect();

    let fit: Vec<&TimingRow> = rows.iter().filter(|r| r.added >= timing.slope_from).collect();
    let slope = |f: fn(&TimingRow) -> f64| {
        let x: Vec<f64> = fit.iter().map(|r| r.added as f64).collect();
        let y: Vec<f64> = fit.iter().map(|r| f(r)).collect();
        stats::log_log_slope(&x, &y).ok()
    };
    Ok(TimingReport {
        n0: timing.n0,
        recursive_slope: slope(|r| r.recursive_secs),
        batch_slope: slope(|r| r.batch_secs),
        rows,
    })
}

fn recursive_arm(
    query: &crate::curves::Curve,
    initial: &Dataset,
    full: &Dataset,
    config: &EstimatorConfig,
    seminorm: &FittedSemiNorm,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    let mut state = QueryState::init(query, initial, config.clone(), seminorm.clone())?;
    let y = full.require_responses("timing")?;
    let n0 = initial.len();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let start = Instant::now();
    for k in 1..=*checkpoints.last().expect("nonempty") {
        state.update(&full.curves()[n0 + k - 1], y[n0 + k - 1])?;
        black_box(state.predict().ok());
        if checkpoints[next] == k {
            out.push(start.elapsed().as_secs_f64());
            next += 1;
        }
    }
    Ok(out)
}

fn refit_arm(
    cfg: &ExperimentConfig,
    timing: &TimingConfig,
    draw: &super::Replication,
    seminorm: &FittedSemiNorm,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    let curves = draw.train.curves();
    let y = draw.train.require_responses("timing")?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let start = Instant::now();
    for k in 1..=*checkpoints.last().expect("nonempty") {
        let m = timing.n0 + k;
        let coords = seminorm.project_all(&curves[..m])?;
        let q = seminorm.project(&draw.query)?;
        let dist = DistanceMatrix::from_coordinates(&coords);
        let (c, nu) = cv_from_distances(
            &dist,
            &y[..m],
            &timing.grid,
            cfg.ell,
            cfg.kernel,
            CvProfile::Constant,
            Execution::Sequential,
        )?
        .selected;
        let d: Vec<f64> = coords.iter().map(|x| coordinate_distance(&q, x)).collect();
        let s = d.iter().cloned().fold(0.0, f64::max);
        let h = BandwidthPlan::new(c, nu, ScaleMode::Sample)?.bandwidth(s, m);
        black_box(batch_estimate_distances(&d, &y[..m], cfg.kernel, h).ok());
        if checkpoints[next] == k {
            out.push(start.elapsed().as_secs_f64());
            next += 1;
        }
    }
    Ok(out)
}
