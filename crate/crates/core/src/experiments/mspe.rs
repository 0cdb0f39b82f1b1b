use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{draw_replication, fit_predict, ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::seminorms::SemiNormSpec;
use crate::stats;

/// One column of a prediction-error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspeCell {
    pub label: String,
    pub n: usize,
    pub ell: f64,
    pub method: Method,
    pub seminorm: SemiNormSpec,
}

impl MspeCell {
    /// A cell with the estimator settings of `cfg` at sample size `n`.
    pub fn from_config(cfg: &ExperimentConfig, n: usize) -> Self {
        MspeCell {
            label: format!("n={n}"),
            n,
            ell: cfg.ell,
            method: Method::Recursive,
            seminorm: cfg.seminorm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspeRecord {
    pub cell: usize,
    pub replication: usize,
    pub estimate: Option<f64>,
    pub response: f64,
    pub truth: f64,
    pub selected: Option<(f64, f64)>,
    /// Error code when the replication could not be fitted.
    pub error: Option<String>,
}

impl MspeRecord {
    /// `(Ŷ − Y)²`
    pub fn squared_error(&self) -> Option<f64> {
        self.estimate.map(|e| (e - self.response) * (e - self.response))
    }

    /// `(r̂(χ) − r(χ))²`
    pub fn squared_estimation_error(&self) -> Option<f64> {
        self.estimate.map(|e| (e - self.truth) * (e - self.truth))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub n: usize,
    pub ell: f64,
    pub method: Method,
    pub seminorm: SemiNormSpec,
    /// Mean of `(Ŷ − Y)²` over fitted replications.
    pub mspe: f64,
    pub sd: f64,
    /// Mean of `(r̂ − r)²`.
    pub mse: f64,
    pub fitted: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspeReport {
    pub config: ExperimentConfig,
    pub cells: Vec<MspeCell>,
    pub records: Vec<MspeRecord>,
}

impl MspeReport {
    /// Per-cell summaries, recomputed from the records.
    pub fn summaries(&self) -> Vec<CellSummary> {
        self.cells
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                let recs: Vec<&MspeRecord> = self.records.iter().filter(|r| r.cell == k).collect();
                let se: Vec<f64> = recs.iter().filter_map(|r| r.squared_error()).collect();
                let ee: Vec<f64> = recs.iter().filter_map(|r| r.squared_estimation_error()).collect();
                let (mspe, sd, mse) = if se.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    (stats::mean(&se), stats::std_dev(&se), stats::mean(&ee))
                };
                CellSummary {
                    label: cell.label.clone(),
                    n: cell.n,
                    ell: cell.ell,
                    method: cell.method,
                    seminorm: cell.seminorm,
                    mspe,
                    sd,
                    mse,
                    fitted: se.len(),
                    failed: recs.len() - se.len(),
                }
            })
            .collect()
    }

    /// How often each `(C, ν)` was selected in `cell`, most frequent first.
    pub fn selection_counts(&self, cell: usize) -> Vec<((f64, f64), usize)> {
        let mut counts: Vec<((f64, f64), usize)> = Vec::new();
        for r in self.records.iter().filter(|r| r.cell == cell) {
            if let Some(pair) = r.selected {
                match counts.iter_mut().find(|(p, _)| *p == pair) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((pair, 1)),
                }
            }
        }
        counts.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then(a.0 .0.total_cmp(&b.0 .0))
                .then(a.0 .1.total_cmp(&b.0 .1))
        });
        counts
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "n", "ell", "method", "seminorm", "mspe", "sd", "mse", "fitted", "failed"])?;
        for s in self.summaries() {
            w.write_record([
                s.label,
                s.n.to_string(),
                s.ell.to_string(),
                format!("{:?}", s.method).to_lowercase(),
                s.seminorm.to_string(),
                s.mspe.to_string(),
                s.sd.to_string(),
                s.mse.to_string(),
                s.fitted.to_string(),
                s.failed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "replication", "estimate", "response", "truth", "C", "nu", "error"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                self.cells[r.cell].label.clone(),
                r.replication.to_string(),
                opt(r.estimate),
                r.response.to_string(),
                r.truth.to_string(),
                opt(r.selected.map(|s| s.0)),
                opt(r.selected.map(|s| s.1)),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Prediction error of every cell over `cfg.replications` replications.
/// Replication `j` draws one sample of the largest requested size and each
/// cell uses its first `n` observations, so all cells see the same query.
pub fn mspe_study(cfg: &ExperimentConfig, cells: &[MspeCell]) -> Result<MspeReport> {
    cfg.validate()?;
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no cells requested".into()));
    }
    for c in cells {
        c.seminorm.validate()?;
        if c.n == 0 {
            return Err(Error::InvalidArgument(format!("cell {} has no observations", c.label)));
        }
    }
    let n_max = cells.iter().map(|c| c.n).max().unwrap_or(0);
    let per_rep = map_indexed(cfg.replications, cfg.execution, |rep| -> Result<Vec<MspeRecord>> {
        let draw = draw_replication(cfg, rep, n_max)?;
        let mut out = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            let train = draw.train.prefix(cell.n)?;
            let fit = fit_predict(
                &train,
                &draw.query,
                cell.seminorm,
                &cfg.bandwidth,
                cell.method,
                cell.ell,
                cfg.kernel,
            );
            let (estimate, selected, error) = match fit {
                Ok(f) => (Some(f.estimate), Some(f.selected), None),
                Err(e) => (None, None, Some(e.code().to_string())),
            };
            out.push(MspeRecord {
                cell: k,
                replication: rep,
                estimate,
                response: draw.query_response,
                truth: draw.query_truth,
                selected,
                error,
            });
        }
        Ok(out)
    });
    let mut records = Vec::with_capacity(cfg.replications * cells.len());
    for r in per_rep {
        records.extend(r?);
    }
    Ok(MspeReport {
        config: cfg.clone(),
        cells: cells.to_vec(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{BandwidthChoice, Target};
    use crate::parallel::Execution;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 40,
            p: 30,
            replications: 12,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn constant_target_without_noise() {
        let cfg = ExperimentConfig {
            target: Target::Constant(2.5),
            noise_sd: 0.0,
            ..small()
        };
        let rep = mspe_study(&cfg, &[MspeCell::from_config(&cfg, 40)]).unwrap();
        let s = &rep.summaries()[0];
        assert_eq!(s.fitted, 12);
        assert!(s.mspe < 1e-24);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let cfg = small();
        let cells = [MspeCell::from_config(&cfg, 20), MspeCell::from_config(&cfg, 40)];
        let a = mspe_study(&cfg, &cells).unwrap();
        let b = mspe_study(
            &ExperimentConfig {
                execution: Execution::Sequential,
                ..cfg
            },
            &cells,
        )
        .unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn summaries_follow_records() {
        let cfg = ExperimentConfig {
            bandwidth: BandwidthChoice::Cv {
                grid: Default::default(),
            },
            ..small()
        };
        let rep = mspe_study(&cfg, &[MspeCell::from_config(&cfg, 30)]).unwrap();
        let se: Vec<f64> = rep.records.iter().filter_map(|r| r.squared_error()).collect();
        let s = &rep.summaries()[0];
        assert_eq!(s.mspe, stats::mean(&se));
        assert_eq!(s.sd, stats::std_dev(&se));
        let total: usize = rep.selection_counts(0).iter().map(|c| c.1).sum();
        assert_eq!(total, s.fitted);
        let mut buf = Vec::new();
        rep.write_summary_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
