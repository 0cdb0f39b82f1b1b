use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{draw_replication, mspe_study, ExperimentConfig, MspeCell};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::seminorms::{coordinate_distance, FittedSemiNorm};
use crate::stats;

/// Lower tail of the distances used to fit `log F̂(t) ~ κ log t`.
const KAPPA_TAIL: f64 = 0.25;
/// Replications used for `κ̂`.
const KAPPA_REPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// Mean of `(r̂(χ) − r(χ))²`.
    pub mse: f64,
    pub mspe: f64,
    pub fitted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub config: ExperimentConfig,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log mse` against `log n`.
    pub slope: f64,
    /// Small-ball exponent fixed by the design, if any.
    pub kappa: Option<f64>,
    /// Mean estimate of κ from the lower tail of `F̂` at the largest `n`.
    pub kappa_hat: f64,
}

impl RateReport {
    /// `−2 / (2 + κ)` with the design κ when known, else `κ̂`.
    pub fn target_slope(&self) -> f64 {
        -2.0 / (2.0 + self.kappa.unwrap_or(self.kappa_hat))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "mse", "mspe", "fitted"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), r.mse.to_string(), r.mspe.to_string(), r.fitted.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Monte Carlo MSE of `r̂(χ)` at each sample size in `ns` and the fitted
/// log-log slope.
pub fn rate_check(ns: &[usize], cfg: &ExperimentConfig) -> Result<RateReport> {
    if ns.len() < 3 {
        return Err(Error::InvalidArgument("the rate check needs at least three sample sizes".into()));
    }
    let cells: Vec<MspeCell> = ns.iter().map(|&n| MspeCell::from_config(cfg, n)).collect();
    let report = mspe_study(cfg, &cells)?;
    let rows: Vec<RateRow> = report
        .summaries()
        .into_iter()
        .map(|s| RateRow {
            n: s.n,
            mse: s.mse,
            mspe: s.mspe,
            fitted: s.fitted,
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    let slope = stats::log_log_slope(&x, &y)?;

    let n_max = *ns.iter().max().expect("nonempty");
    let kappas = map_indexed(cfg.replications.min(KAPPA_REPS), cfg.execution, |rep| -> Result<f64> {
        let draw = draw_replication(cfg, rep, n_max)?;
        let sn = FittedSemiNorm::fit(cfg.seminorm, &draw.train)?;
        let q = sn.project(&draw.query)?;
        let d: Vec<f64> = sn
            .project_all(draw.train.curves())?
            .iter()
            .map(|c| coordinate_distance(&q, c))
            .collect();
        stats::small_ball_exponent(&d, KAPPA_TAIL)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    Ok(RateReport {
        config: cfg.clone(),
        rows,
        slope,
        kappa: cfg.design.kappa(),
        kappa_hat: stats::mean(&kappas),
    })
}
