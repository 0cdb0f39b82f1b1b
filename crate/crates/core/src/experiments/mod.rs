//! Monte Carlo studies and the recursive-versus-refit timing benchmark.
//!
//! Every replication draws its data from its own stream
//! `stream_rng(seed, replication)`, so results do not depend on how
//! replications are scheduled across threads. Within a replication the query
//! curve is drawn first and the training observations after it, so studies
//! over several sample sizes reuse nested prefixes of the same sample.

mod coverage;
mod mspe;
mod rate;
mod timing;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{cv_from_distances, BandwidthPlan, CvGrid, CvProfile, DistanceMatrix, ScaleMode};
use crate::curves::{brownian_curve, stream_rng, target_operator, Curve, Dataset, Grid};
use crate::error::{Error, Result};
use crate::estimator::{
    batch_estimate_distances, recursive_estimate_distances, CdfPolicy, EstimatorConfig, Kernel, QueryState,
};
use crate::parallel::Execution;
use crate::seminorms::{coordinate_distance, fourier_basis, FittedSemiNorm, SemiNormSpec};

pub use coverage::{coverage_study, CoverageRecord, CoverageReport};
pub use mspe::{mspe_study, CellSummary, MspeCell, MspeRecord, MspeReport};
pub use rate::{rate_check, RateReport, RateRow};
pub use timing::{timing_benchmark, TimingConfig, TimingReport, TimingRow};

/// How curves are generated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Design {
    /// Standard Brownian motions; the query is a fresh Brownian motion.
    #[default]
    Brownian,
    /// `X = Σ_{k<dims} U_k e_k` with `U_k` uniform on `[−1, 1]` and `e_k` the
    /// first trigonometric basis functions; the query is the zero curve.
    /// With the matching Fourier semi-norm the small-ball law at the query
    /// is `F(t) ∝ t^dims` for `t ≤ 1`, so `κ = dims`.
    Cube { dims: usize },
}

impl Design {
    /// The small-ball exponent when the design fixes it.
    pub fn kappa(&self) -> Option<f64> {
        match self {
            Design::Brownian => None,
            Design::Cube { dims } => Some(*dims as f64),
        }
    }

    /// The semi-norm under which [`Design::kappa`] holds.
    pub fn natural_seminorm(&self) -> Option<SemiNormSpec> {
        match self {
            Design::Brownian => None,
            Design::Cube { dims } => Some(SemiNormSpec::fourier(*dims)),
        }
    }

    fn curve(&self, grid: Grid, basis: &[Curve], rng: &mut ChaCha8Rng) -> Curve {
        match self {
            Design::Brownian => brownian_curve(grid, rng),
            Design::Cube { .. } => {
                let mut v = vec![0.0; grid.len()];
                for e in basis {
                    let u: f64 = rng.random_range(-1.0..=1.0);
                    for (a, b) in v.iter_mut().zip(e.values()) {
                        *a += u * b;
                    }
                }
                Curve::new(grid, v).expect("finite combination of basis curves")
            }
        }
    }

    fn query(&self, grid: Grid, basis: &[Curve], rng: &mut ChaCha8Rng) -> Curve {
        match self {
            Design::Brownian => self.curve(grid, basis, rng),
            Design::Cube { .. } => Curve::new(grid, vec![0.0; grid.len()]).expect("zero curve"),
        }
    }
}

/// The regression function generating the responses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Target {
    /// `r(χ) = ∫₀¹ χ(s)² ds`
    #[default]
    SquareIntegral,
    Constant(f64),
}

impl Target {
    pub fn eval(&self, chi: &Curve) -> f64 {
        match self {
            Target::SquareIntegral => target_operator(chi),
            Target::Constant(c) => *c,
        }
    }
}

/// Fixed `(C, ν)` or leave-one-out selection on each training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BandwidthChoice {
    Fixed { c: f64, nu: f64 },
    Cv { grid: CvGrid },
}

impl Default for BandwidthChoice {
    fn default() -> Self {
        BandwidthChoice::Fixed { c: 1.0, nu: 0.1 }
    }
}

/// Recursive estimator with `h_i`, or the fixed-bandwidth estimator with the
/// single bandwidth `h_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Recursive,
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: Design,
    pub target: Target,
    pub n: usize,
    pub p: usize,
    pub noise_sd: f64,
    pub replications: usize,
    pub seed: u64,
    pub ell: f64,
    pub kernel: Kernel,
    pub seminorm: SemiNormSpec,
    pub bandwidth: BandwidthChoice,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            design: Design::Brownian,
            target: Target::SquareIntegral,
            n: 100,
            p: 100,
            noise_sd: 0.1,
            replications: 500,
            seed: 1,
            ell: 0.0,
            kernel: Kernel::quadratic(),
            seminorm: SemiNormSpec::pca(3),
            bandwidth: BandwidthChoice::default(),
            execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("at least one replication is required".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        if self.p < 2 {
            return Err(Error::InvalidArgument(format!("grids need p ≥ 2, got {}", self.p)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sd must be ≥ 0, got {}", self.noise_sd)));
        }
        if let Design::Cube { dims } = self.design {
            if dims == 0 || dims > self.p {
                return Err(Error::InvalidArgument(format!("cube design needs 1 ≤ dims ≤ p, got {dims}")));
            }
        }
        match &self.bandwidth {
            BandwidthChoice::Fixed { c, nu } => {
                BandwidthPlan::new(*c, *nu, ScaleMode::Sample)?;
            }
            BandwidthChoice::Cv { grid } => grid.validate()?,
        }
        EstimatorConfig {
            ell: self.ell,
            ..EstimatorConfig::default()
        }
        .validate()?;
        self.seminorm.validate()
    }
}

/// One replication: the query and `n` training observations.
#[derive(Debug, Clone)]
pub struct Replication {
    pub query: Curve,
    pub query_response: f64,
    pub query_truth: f64,
    pub train: Dataset,
}

/// Draws the query followed by `n` training observations from the stream of
/// replication `rep`.
pub fn draw_replication(cfg: &ExperimentConfig, rep: usize, n: usize) -> Result<Replication> {
    let grid = Grid::new(cfg.p)?;
    let basis = match cfg.design {
        Design::Brownian => Vec::new(),
        Design::Cube { dims } => fourier_basis(grid, dims),
    };
    let mut rng = stream_rng(cfg.seed, rep as u64);
    let noise = |rng: &mut ChaCha8Rng| -> f64 { cfg.noise_sd * rng.sample::<f64, _>(rand_distr::StandardNormal) };

    let query = cfg.design.query(grid, &basis, &mut rng);
    let query_truth = cfg.target.eval(&query);
    let query_response = query_truth + noise(&mut rng);

    let mut curves = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let x = cfg.design.curve(grid, &basis, &mut rng);
        responses.push(cfg.target.eval(&x) + noise(&mut rng));
        curves.push(x);
    }
    Ok(Replication {
        query,
        query_response,
        query_truth,
        train: Dataset::new(curves, Some(responses))?,
    })
}

/// A fitted prediction at the query of a replication.
#[derive(Debug, Clone)]
pub(crate) struct Fit {
    pub estimate: f64,
    pub selected: (f64, f64),
    pub distances: Vec<f64>,
    pub seminorm: FittedSemiNorm,
    pub query_coords: Vec<f64>,
}

/// Fits the semi-norm on `train`, picks `(C, ν)` and predicts at `query`.
pub(crate) fn fit_predict(
    train: &Dataset,
    query: &Curve,
    spec: SemiNormSpec,
    choice: &BandwidthChoice,
    method: Method,
    ell: f64,
    kernel: Kernel,
) -> Result<Fit> {
    let seminorm = FittedSemiNorm::fit(spec, train)?;
    let y = train.require_responses("prediction")?;
    let coords = seminorm.project_all(train.curves())?;
    let query_coords = seminorm.project(query)?;
    let distances: Vec<f64> = coords.iter().map(|c| coordinate_distance(&query_coords, c)).collect();

    let (c, nu) = match choice {
        BandwidthChoice::Fixed { c, nu } => (*c, *nu),
        BandwidthChoice::Cv { grid } => {
            let profile = match method {
                Method::Recursive => CvProfile::Recursive,
                Method::Batch => CvProfile::Constant,
            };
            let dist = DistanceMatrix::from_coordinates(&coords);
            cv_from_distances(&dist, y, grid, ell, kernel, profile, Execution::Sequential)?.selected
        }
    };
    let config = EstimatorConfig {
        ell,
        kernel,
        plan: BandwidthPlan::new(c, nu, ScaleMode::Sample)?,
        policy: CdfPolicy::Frozen,
    };
    let estimate = match method {
        Method::Recursive => recursive_estimate_distances(&distances, y, &config)?,
        Method::Batch => {
            let s = distances.iter().cloned().fold(0.0, f64::max);
            let h = config.plan.bandwidth(s, distances.len());
            if !(h > 0.0) {
                return Err(Error::EmptyNeighborhood);
            }
            batch_estimate_distances(&distances, y, kernel, h)?
        }
    };
    Ok(Fit {
        estimate,
        selected: (c, nu),
        distances,
        seminorm,
        query_coords,
    })
}

impl Fit {
    /// The full recursive state behind the estimate, for plug-in quantities.
    pub(crate) fn state(self, query: &Curve, train: &Dataset, ell: f64, kernel: Kernel) -> Result<QueryState> {
        let config = EstimatorConfig {
            ell,
            kernel,
            plan: BandwidthPlan::new(self.selected.0, self.selected.1, ScaleMode::Sample)?,
            policy: CdfPolicy::Frozen,
        };
        QueryState::from_distances(
            query.clone(),
            self.query_coords,
            config,
            self.seminorm,
            &self.distances,
            train.require_responses("prediction")?,
        )
    }
}

/// Writes `series,x,y` rows for external plotting.
pub fn write_plot_data<W: std::io::Write>(out: W, series: &[(&str, Vec<(f64, f64)>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "y"])?;
    for (name, points) in series {
        for (x, y) in points {
            w.write_record([name.to_string(), x.to_string(), y.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
