use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{draw_replication, fit_predict, ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub replication: usize,
    pub truth: f64,
    pub estimate: Option<f64>,
    pub low: Option<f64>,
    pub high: Option<f64>,
    /// `(r̂ − r) / se`
    pub pivot: Option<f64>,
    /// Why the replication was excluded, if it was.
    pub excluded: Option<String>,
}

impl CoverageRecord {
    pub fn covered(&self) -> Option<bool> {
        match (self.low, self.high) {
            (Some(l), Some(h)) if self.excluded.is_none() => Some(l <= self.truth && self.truth <= h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: ExperimentConfig,
    pub alpha: f64,
    pub records: Vec<CoverageRecord>,
}

impl CoverageReport {
    pub fn pivots(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.pivot).collect()
    }

    pub fn excluded(&self) -> usize {
        self.records.iter().filter(|r| r.excluded.is_some()).count()
    }

    /// Fraction of the retained replications whose band covers `r(χ)`.
    pub fn coverage(&self) -> f64 {
        let flags: Vec<bool> = self.records.iter().filter_map(|r| r.covered()).collect();
        flags.iter().filter(|&&c| c).count() as f64 / flags.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replication", "truth", "estimate", "low", "high", "pivot", "covered", "excluded"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.replication.to_string(),
                r.truth.to_string(),
                opt(r.estimate),
                opt(r.low),
                opt(r.high),
                opt(r.pivot),
                r.covered().map(|c| c.to_string()).unwrap_or_default(),
                r.excluded.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// `(mean, sd, skewness, excess kurtosis)` of the pivot sample.
    pub fn pivot_moments(&self) -> (f64, f64, f64, f64) {
        let p = self.pivots();
        (
            stats::mean(&p),
            stats::std_dev(&p),
            stats::skewness(&p),
            stats::excess_kurtosis(&p),
        )
    }
}

/// Empirical coverage of the `1 − α` band for `r(χ)` at sample size `cfg.n`
/// with the recursive estimator of order 0.
pub fn coverage_study(cfg: &ExperimentConfig, alpha: f64) -> Result<CoverageReport> {
    cfg.validate()?;
    if cfg.ell != 0.0 {
        return Err(Error::InvalidArgument("coverage is defined for ℓ = 0".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("α must lie in (0, 1), got {alpha}")));
    }
    let records = map_indexed(cfg.replications, cfg.execution, |rep| -> Result<CoverageRecord> {
        let draw = draw_replication(cfg, rep, cfg.n)?;
        let mut rec = CoverageRecord {
            replication: rep,
            truth: draw.query_truth,
            estimate: None,
            low: None,
            high: None,
            pivot: None,
            excluded: None,
        };
        let outcome = fit_predict(
            &draw.train,
            &draw.query,
            cfg.seminorm,
            &cfg.bandwidth,
            Method::Recursive,
            0.0,
            cfg.kernel,
        )
        .and_then(|fit| fit.state(&draw.query, &draw.train, 0.0, cfg.kernel))
        .and_then(|state| {
            let band = state.confidence_band(alpha)?;
            let pivot = state.pivot(draw.query_truth)?;
            Ok((state.predict()?, band, pivot))
        });
        match outcome {
            Ok((estimate, band, pivot)) => {
                rec.estimate = Some(estimate);
                rec.low = Some(band.low);
                rec.high = Some(band.high);
                rec.pivot = Some(pivot);
            }
            Err(e) => rec.excluded = Some(e.code().to_string()),
        }
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CoverageReport {
        config: cfg.clone(),
        alpha,
        records,
    })
}
