//! Bandwidth sequences `h_i = C · S · i^{−ν}` and leave-one-out selection of
//! `(C, ν)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curves::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{batch_estimate_distances, recursive_estimate_distances, CdfPolicy, EstimatorConfig, Kernel};
use crate::parallel::{map_indexed, Execution};
use crate::seminorms::{coordinate_distance, FittedSemiNorm, SemiNormSpec};

/// Where the scale `S` in `h_i = C S i^{−ν}` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum ScaleMode {
    /// `S = max_i ‖X_i − χ‖` over the sample the state is built from.
    #[default]
    Sample,
    /// A user supplied `S`.
    Fixed(f64),
    /// `S_i = max_{j ≤ i} ‖X_j − χ‖`, which keeps streaming updates exact.
    Running,
}

/// `h_i = C S i^{−ν}`. The decreasing sequences use `ν ∈ (0, 1]`; `ν = 0`
/// is accepted as the constant bandwidth `C S` of the non-recursive
/// estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPlan {
    pub c: f64,
    pub nu: f64,
    pub scale: ScaleMode,
}

impl Default for BandwidthPlan {
    fn default() -> Self {
        BandwidthPlan {
            c: 1.0,
            nu: 0.1,
            scale: ScaleMode::Sample,
        }
    }
}

impl BandwidthPlan {
    pub fn new(c: f64, nu: f64, scale: ScaleMode) -> Result<Self> {
        let plan = BandwidthPlan { c, nu, scale };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::InvalidArgument(format!("ν must lie in [0, 1], got {}", self.nu)));
        }
        if let ScaleMode::Fixed(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Constant bandwidth `h` for every observation.
    pub fn constant(h: f64) -> Result<Self> {
        Self::new(h, 0.0, ScaleMode::Fixed(1.0))
    }

    /// `h_i` for the 1-based index `i`.
    #[inline]
    pub fn bandwidth(&self, scale: f64, i: usize) -> f64 {
        // exp2(−ν log2 i) is exact at powers of two, unlike powf.
        self.c * scale * (-self.nu * (i as f64).log2()).exp2()
    }
}

/// `h_1, …, h_n` with `h_i = C S i^{−ν}`.
pub fn bandwidth_sequence(c: f64, nu: f64, s: f64, n: usize) -> Result<Vec<f64>> {
    if nu == 0.0 {
        return Err(Error::InvalidArgument("ν must be positive for a decreasing sequence".into()));
    }
    let plan = BandwidthPlan::new(c, nu, ScaleMode::Fixed(s))?;
    Ok((1..=n).map(|i| plan.bandwidth(s, i)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub c_values: Vec<f64>,
    pub nu_values: Vec<f64>,
}

impl Default for CvGrid {
    fn default() -> Self {
        CvGrid {
            c_values: vec![0.5, 1.0, 2.0, 10.0],
            nu_values: vec![1.0 / 10.0, 1.0 / 8.0, 1.0 / 6.0, 1.0 / 5.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0, 1.0],
        }
    }
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.nu_values.is_empty() {
            return Err(Error::InvalidArgument("empty cross-validation grid".into()));
        }
        for &c in &self.c_values {
            for &nu in &self.nu_values {
                if nu == 0.0 {
                    return Err(Error::InvalidArgument("grid values of ν must be positive".into()));
                }
                BandwidthPlan::new(c, nu, ScaleMode::Sample)?;
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.c_values
            .iter()
            .flat_map(|&c| self.nu_values.iter().map(move |&nu| (c, nu)))
            .collect()
    }
}

/// How the left-out prediction smooths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvProfile {
    /// `h_j = C S j^{−ν}` for the remaining observations `j = 1..n−1`.
    #[default]
    Recursive,
    /// One bandwidth `h = C S (n−1)^{−ν}` for every observation.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub c: f64,
    pub nu: f64,
    /// Mean squared leave-one-out residual over the scored observations,
    /// `+∞` when none could be scored.
    pub score: f64,
    pub skipped: usize,
    /// More than 20% of the observations had an empty neighborhood.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n: usize,
    pub rows: Vec<CvRow>,
    pub selected: (f64, f64),
}

impl CvReport {
    pub fn selected_row(&self) -> &CvRow {
        self.rows
            .iter()
            .find(|r| (r.c, r.nu) == self.selected)
            .expect("selected pair is one of the rows")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["C", "nu", "score", "skipped", "flagged"])?;
        for r in &self.rows {
            w.write_record([
                r.c.to_string(),
                r.nu.to_string(),
                r.score.to_string(),
                r.skipped.to_string(),
                r.flagged.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Symmetric matrix of `‖X_i − X_j‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_coordinates(coords: &[Vec<f64>]) -> Self {
        let n = coords.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = coordinate_distance(&coords[i], &coords[j]);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn new(seminorm: &FittedSemiNorm, data: &Dataset) -> Result<Self> {
        Ok(Self::from_coordinates(&seminorm.project_all(data.curves())?))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Row `i` without its diagonal entry, in the original order.
    pub fn loo_row(&self, i: usize) -> Vec<f64> {
        let row = self.row(i);
        row[..i].iter().chain(&row[i + 1..]).copied().collect()
    }
}

/// Leave-one-out selection of `(C, ν)` with the semi-norm fitted once on
/// the whole sample.
pub fn cv_select(data: &Dataset, grid: &CvGrid, ell: f64, kernel: Kernel, spec: SemiNormSpec) -> Result<CvReport> {
    let seminorm = FittedSemiNorm::fit(spec, data)?;
    let y = data.require_responses("cross-validation")?;
    let dist = DistanceMatrix::new(&seminorm, data)?;
    cv_from_distances(&dist, y, grid, ell, kernel, CvProfile::Recursive, Execution::Parallel)
}

pub fn cv_from_distances(
    dist: &DistanceMatrix,
    responses: &[f64],
    grid: &CvGrid,
    ell: f64,
    kernel: Kernel,
    profile: CvProfile,
    exec: Execution,
) -> Result<CvReport> {
    grid.validate()?;
    let n = dist.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 3 observations, got {n}"
        )));
    }
    if responses.len() != n {
        return Err(Error::Dimension(format!("{n} curves but {} responses", responses.len())));
    }
    let folds: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|i| {
            let y: Vec<f64> = responses[..i].iter().chain(&responses[i + 1..]).copied().collect();
            (dist.loo_row(i), y)
        })
        .collect();

    let pairs = grid.pairs();
    let rows = map_indexed(pairs.len(), exec, |k| {
        let (c, nu) = pairs[k];
        score_pair(&folds, responses, c, nu, ell, kernel, profile)
    })
    .into_iter()
    .collect::<Result<Vec<CvRow>>>()?;

    let best = rows
        .iter()
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.c.total_cmp(&b.c))
                .then(a.nu.total_cmp(&b.nu))
        })
        .expect("grid is nonempty");
    let selected = (best.c, best.nu);
    Ok(CvReport { n, rows, selected })
}

fn score_pair(
    folds: &[(Vec<f64>, Vec<f64>)],
    responses: &[f64],
    c: f64,
    nu: f64,
    ell: f64,
    kernel: Kernel,
    profile: CvProfile,
) -> Result<CvRow> {
    let config = EstimatorConfig {
        ell,
        kernel,
        plan: BandwidthPlan::new(c, nu, ScaleMode::Sample)?,
        policy: CdfPolicy::Frozen,
    };
    let (mut total, mut scored, mut skipped) = (0.0, 0usize, 0usize);
    for ((d, y), &target) in folds.iter().zip(responses) {
        let fit = match profile {
            CvProfile::Recursive => recursive_estimate_distances(d, y, &config),
            CvProfile::Constant => {
                let s = d.iter().cloned().fold(0.0, f64::max);
                let h = config.plan.bandwidth(s, d.len());
                if h > 0.0 {
                    batch_estimate_distances(d, y, kernel, h)
                } else {
                    Err(Error::EmptyNeighborhood)
                }
            }
        };
        match fit {
            Ok(r) => {
                total += (target - r) * (target - r);
                scored += 1;
            }
            Err(Error::EmptyNeighborhood) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let score = if scored == 0 { f64::INFINITY } else { total / scored as f64 };
    Ok(CvRow {
        c,
        nu,
        score,
        skipped,
        flagged: skipped * 5 > folds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_examples() {
        let h = bandwidth_sequence(1.0, 0.1, 2.0, 1024).unwrap();
        assert_eq!(h[0], 2.0);
        assert_eq!(h[1023], 1.0);
        assert!(h.windows(2).all(|w| w[1] < w[0]));
        let h = bandwidth_sequence(1.0, 1.0, 1.0, 10).unwrap();
        for (i, v) in h.iter().enumerate() {
            assert!((v - 1.0 / (i + 1) as f64).abs() < 1e-15);
        }
        assert!(bandwidth_sequence(1.0, 0.0, 1.0, 3).is_err());
        assert!(bandwidth_sequence(-1.0, 0.5, 1.0, 3).is_err());
    }

    fn line_matrix(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_coordinates(&points.iter().map(|&x| vec![x]).collect::<Vec<_>>())
    }

    #[test]
    fn constant_responses_pick_smallest_pair() {
        let d = line_matrix(&[0.0, 0.3, 0.5, 0.9, 1.4, 2.0]);
        let rep = cv_from_distances(
            &d,
            &[2.0; 6],
            &CvGrid::default(),
            0.0,
            Kernel::quadratic(),
            CvProfile::Recursive,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rep.selected, (0.5, 0.1));
        assert!(rep.rows.iter().all(|r| r.score == 0.0 || r.score.is_infinite()));
    }

    #[test]
    fn three_point_hand_computation() {
        // Points 0, 1, 3 on a line, uniform kernel, C = 1, ν = 1/2.
        //   leave out 0: d = (1, 3), S = 3, h = (3, 3/√2 ≈ 2.12) → only j=1 → r = y1
        //   leave out 1: d = (1, 2), S = 2, h = (2, √2)          → only j=1 → r = y0
        //   leave out 3: d = (3, 2), S = 3, h = (3, 2.12)        → both   → (y0 + y1)/2
        let d = line_matrix(&[0.0, 1.0, 3.0]);
        let y = [1.0, 2.0, 6.0];
        let grid = CvGrid {
            c_values: vec![1.0],
            nu_values: vec![0.5],
        };
        let rep = cv_from_distances(&d, &y, &grid, 0.0, Kernel::uniform(), CvProfile::Recursive, Execution::Sequential)
            .unwrap();
        let expected = ((1.0f64 - 2.0).powi(2) + (2.0f64 - 1.0).powi(2) + (6.0f64 - 1.5).powi(2)) / 3.0;
        assert!((rep.rows[0].score - expected).abs() < 1e-14);
        assert_eq!(rep.rows[0].skipped, 0);
    }

    #[test]
    fn grid_order_does_not_matter() {
        let d = line_matrix(&[0.0, 0.2, 0.35, 0.9, 1.1, 1.7, 2.4, 2.5]);
        let y = [0.1, 0.5, 0.2, 0.9, 1.3, 0.7, 2.0, 1.9];
        let grid = CvGrid::default();
        let mut rev = grid.clone();
        rev.c_values.reverse();
        rev.nu_values.reverse();
        let run = |g: &CvGrid| {
            cv_from_distances(&d, &y, g, 0.0, Kernel::quadratic(), CvProfile::Recursive, Execution::Parallel).unwrap()
        };
        let (a, b) = (run(&grid), run(&rev));
        assert_eq!(a.selected, b.selected);
        for r in &a.rows {
            let s = b.rows.iter().find(|x| (x.c, x.nu) == (r.c, r.nu)).unwrap();
            assert_eq!(r.score, s.score);
        }
    }

    #[test]
    fn too_small_sample() {
        let d = line_matrix(&[0.0, 1.0]);
        assert!(cv_from_distances(
            &d,
            &[1.0, 2.0],
            &CvGrid::default(),
            0.0,
            Kernel::uniform(),
            CvProfile::Recursive,
            Execution::Sequential
        )
        .is_err());
    }
}
