//! Per-query recursive accumulators.
//!
//! For a fixed query curve `χ`, the estimator of order `ℓ` is
//!
//! ```text
//!            Σ Y_i F̂(h_i)^{-ℓ} K(d_i / h_i)
//! r_n(χ) = ---------------------------------,   d_i = ‖χ − X_i‖
//!            Σ     F̂(h_i)^{-ℓ} K(d_i / h_i)
//! ```
//!
//! Each arrival adds one term to the numerator and denominator, so updating
//! costs one distance evaluation plus an insertion in the sorted distances.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{BandwidthPlan, ScaleMode};
use crate::curves::{Curve, Dataset};
use crate::error::{Error, Result};
use crate::seminorms::{coordinate_distance, FittedSemiNorm};

use super::cdf::SortedDistances;
use super::kernel::Kernel;
use super::normal::normal_quantile;

/// How the empirical small-ball CDF entering the weights is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdfPolicy {
    /// `F̂` is frozen at initialization (or at the last [`QueryState::refresh_cdf`])
    /// and new terms are weighted against it. Updates stay exact and O(log n).
    #[default]
    Frozen,
    /// `F̂` is recomputed from all stored distances after each arrival and every
    /// weighted sum is rebuilt, at O(n) per update.
    Refresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Order `ℓ ∈ [0, 1]` of the `F̂(h_i)^{-ℓ}` weights.
    pub ell: f64,
    pub kernel: Kernel,
    pub plan: BandwidthPlan,
    pub policy: CdfPolicy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            ell: 0.0,
            kernel: Kernel::quadratic(),
            plan: BandwidthPlan::default(),
            policy: CdfPolicy::Frozen,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ell) {
            return Err(Error::InvalidArgument(format!(
                "ℓ must lie in [0, 1], got {}",
                self.ell
            )));
        }
        self.plan.validate()
    }
}

/// Running sums over the observations seen so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sums {
    /// `Σ Y_i K_i / F̂(h_i)^ℓ`
    pub num: f64,
    /// `Σ K_i / F̂(h_i)^ℓ`
    pub den: f64,
    /// `Σ Y_i K_i`
    pub num_unw: f64,
    /// `Σ Y_i² K_i`
    pub num2_unw: f64,
    /// `Σ K_i`
    pub den_unw: f64,
    /// `Σ F̂(h_i)^{1−ℓ}`
    pub wsum: f64,
    /// `Σ K_i / F̂(h_i)`
    pub m1_sum: f64,
    /// `Σ K_i² / F̂(h_i)`
    pub m2_sum: f64,
    /// `Σ F̂(h_i)`
    pub beta_sum: f64,
    /// Number of arrivals with `F̂(h_i) = 0`.
    pub zero_cdf_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub distance: f64,
    pub bandwidth: f64,
    pub response: f64,
}

/// Plug-in estimates of the constants of the normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugIn {
    pub m1: f64,
    pub m2: f64,
    pub beta1: f64,
    pub sigma2: f64,
    /// `F̂(h_n)`
    pub f_hat: f64,
    pub n: usize,
}

impl PlugIn {
    /// `√(M̂2 σ̂² / (β̂ M̂1²)) / √(n F̂(h_n))`, the standard error of `r̂`.
    pub fn standard_error(&self) -> f64 {
        (self.m2 * self.sigma2 / (self.beta1 * self.m1 * self.m1)).sqrt()
            / (self.n as f64 * self.f_hat).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub low: f64,
    pub high: f64,
    pub half_width: f64,
    pub z: f64,
}

/// Half-width `z · √(M̂2 σ̂² / (β̂ M̂1²)) / √(n F̂(h_n))` of the band.
pub fn band_half_width(z: f64, plug: &PlugIn) -> f64 {
    z * plug.standard_error()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub f_hat_hn: f64,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub beta1: Option<f64>,
    pub sigma2: Option<f64>,
    pub effective_sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub estimate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryState {
    query: Curve,
    query_coords: Vec<f64>,
    config: EstimatorConfig,
    seminorm: FittedSemiNorm,
    /// Frozen `S`, or the running maximum distance in running mode.
    scale: f64,
    /// Every distance seen so far.
    distances: SortedDistances,
    /// Distances defining the `F̂` used in the weights.
    reference: SortedDistances,
    sums: Sums,
    history: Vec<Arrival>,
}

impl QueryState {
    /// Feeds the observations of `data` in order. `F̂` and, in sample-scale
    /// mode, `S = max_i d_i` are taken from the whole of `data`.
    pub fn init(
        query: &Curve,
        data: &Dataset,
        config: EstimatorConfig,
        seminorm: FittedSemiNorm,
    ) -> Result<Self> {
        let responses = data.require_responses("the regression estimator")?;
        let query_coords = seminorm.project(query)?;
        let distances: Vec<f64> = data
            .curves()
            .iter()
            .map(|x| seminorm.project(x).map(|c| coordinate_distance(&query_coords, &c)))
            .collect::<Result<_>>()?;
        Self::from_distances(query.clone(), query_coords, config, seminorm, &distances, responses)
    }

    /// Same as [`QueryState::init`] from precomputed distances.
    pub fn from_distances(
        query: Curve,
        query_coords: Vec<f64>,
        config: EstimatorConfig,
        seminorm: FittedSemiNorm,
        distances: &[f64],
        responses: &[f64],
    ) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if distances.len() != responses.len() {
            return Err(Error::Dimension(format!(
                "{} distances but {} responses",
                distances.len(),
                responses.len()
            )));
        }
        let sample_max = distances.iter().cloned().fold(0.0, f64::max);
        let reference = SortedDistances::from_unsorted(distances.to_vec());
        let mut state = Self::empty(query, query_coords, config, seminorm, reference, sample_max)?;
        for (&d, &y) in distances.iter().zip(responses) {
            state.push_distance(d, y)?;
        }
        Ok(state)
    }

    /// A state with no observations whose `F̂` is frozen to `reference` and
    /// whose sample scale (if the plan uses one) is `sample_scale`.
    pub fn with_reference(
        query: &Curve,
        config: EstimatorConfig,
        seminorm: FittedSemiNorm,
        reference: Vec<f64>,
        sample_scale: f64,
    ) -> Result<Self> {
        let query_coords = seminorm.project(query)?;
        Self::empty(
            query.clone(),
            query_coords,
            config,
            seminorm,
            SortedDistances::from_unsorted(reference),
            sample_scale,
        )
    }

    fn empty(
        query: Curve,
        query_coords: Vec<f64>,
        config: EstimatorConfig,
        seminorm: FittedSemiNorm,
        reference: SortedDistances,
        sample_scale: f64,
    ) -> Result<Self> {
        config.validate()?;
        let scale = match config.plan.scale {
            ScaleMode::Sample => sample_scale,
            ScaleMode::Fixed(s) => s,
            ScaleMode::Running => 0.0,
        };
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth scale {scale} is invalid")));
        }
        Ok(QueryState {
            query,
            query_coords,
            config,
            seminorm,
            scale,
            distances: SortedDistances::new(),
            reference,
            sums: Sums::default(),
            history: Vec::new(),
        })
    }

    /// Adds observation `n + 1`.
    pub fn update(&mut self, x: &Curve, y: f64) -> Result<()> {
        let coords = self.seminorm.project(x)?;
        let d = coordinate_distance(&self.query_coords, &coords);
        self.push_distance(d, y)
    }

    /// Adds an observation at known distance `d` from the query.
    pub fn push_distance(&mut self, d: f64, y: f64) -> Result<()> {
        if !(d >= 0.0 && d.is_finite() && y.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "observation with distance {d} and response {y} is not finite"
            )));
        }
        let index = self.history.len() + 1;
        let scale = match self.config.plan.scale {
            ScaleMode::Running => self.scale.max(d),
            _ => self.scale,
        };
        let arrival = Arrival {
            distance: d,
            bandwidth: self.config.plan.bandwidth(scale, index),
            response: y,
        };
        match self.config.policy {
            CdfPolicy::Frozen => {
                let mut sums = self.sums.clone();
                accumulate(&mut sums, &self.config, &self.reference, &arrival)?;
                self.sums = sums;
                self.scale = scale;
                self.distances.insert(d);
                self.history.push(arrival);
            }
            CdfPolicy::Refresh => {
                self.scale = scale;
                self.distances.insert(d);
                self.history.push(arrival);
                self.refresh_cdf()?;
            }
        }
        Ok(())
    }

    /// Freezes `F̂` at the current distances and rebuilds every sum, O(n).
    pub fn refresh_cdf(&mut self) -> Result<()> {
        let reference = self.distances.clone();
        let mut sums = Sums::default();
        for arrival in &self.history {
            accumulate(&mut sums, &self.config, &reference, arrival)?;
        }
        self.reference = reference;
        self.sums = sums;
        Ok(())
    }

    /// `r_n^[ℓ](χ) = num / den`.
    pub fn predict(&self) -> Result<f64> {
        if self.sums.den > 0.0 {
            Ok(self.sums.num / self.sums.den)
        } else {
            Err(Error::EmptyNeighborhood)
        }
    }

    /// `F̂(t)` over every distance seen so far.
    pub fn empirical_cdf(&self, t: f64) -> f64 {
        self.distances.cdf(t)
    }

    /// `F̂` as used in the weights (frozen reference).
    pub fn weight_cdf(&self, t: f64) -> f64 {
        self.reference.cdf(t)
    }

    /// `φ_n = num / Σ F̂(h_i)^{1−ℓ}`.
    pub fn phi(&self) -> f64 {
        self.sums.num / self.sums.wsum
    }

    /// `f_n = den / Σ F̂(h_i)^{1−ℓ}`.
    pub fn f(&self) -> f64 {
        self.sums.den / self.sums.wsum
    }

    pub fn plug_in_constants(&self) -> Result<PlugIn> {
        let n = self.history.len();
        let last = self.history.last().ok_or(Error::EmptyDataset)?;
        if !(self.sums.den_unw > 0.0) {
            return Err(Error::EmptyNeighborhood);
        }
        if self.sums.zero_cdf_terms > 0 {
            return Err(Error::DegenerateCdf(format!(
                "F̂(h_i) = 0 for {} of {n} bandwidths",
                self.sums.zero_cdf_terms
            )));
        }
        let f_hat = self.reference.cdf(last.bandwidth);
        let nf = n as f64;
        let mean = self.sums.num_unw / self.sums.den_unw;
        let sigma2 = (self.sums.num2_unw / self.sums.den_unw - mean * mean).max(0.0);
        Ok(PlugIn {
            m1: self.sums.m1_sum / nf,
            m2: self.sums.m2_sum / nf,
            beta1: self.sums.beta_sum / (nf * f_hat),
            sigma2,
            f_hat,
            n,
        })
    }

    /// Asymptotic `1 − α` band for `r(χ)`; requires `ℓ = 0`. A zero variance
    /// estimate yields the point interval `[r̂, r̂]`.
    pub fn confidence_band(&self, alpha: f64) -> Result<ConfidenceBand> {
        if self.config.ell != 0.0 {
            return Err(Error::InvalidArgument(
                "confidence bands are available for ℓ = 0 only".into(),
            ));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("α must lie in (0, 1), got {alpha}")));
        }
        let estimate = self.predict()?;
        let plug = self.plug_in_constants()?;
        let z = normal_quantile(1.0 - alpha / 2.0);
        let half_width = if plug.sigma2 > 0.0 {
            band_half_width(z, &plug)
        } else {
            0.0
        };
        Ok(ConfidenceBand {
            low: estimate - half_width,
            high: estimate + half_width,
            half_width,
            z,
        })
    }

    /// Standardized error `(r̂ − r) / se`, asymptotically standard normal.
    pub fn pivot(&self, truth: f64) -> Result<f64> {
        if self.config.ell != 0.0 {
            return Err(Error::InvalidArgument("the pivot is defined for ℓ = 0 only".into()));
        }
        let estimate = self.predict()?;
        let plug = self.plug_in_constants()?;
        if !(plug.sigma2 > 0.0) {
            return Err(Error::ZeroVariance);
        }
        Ok((estimate - truth) / plug.standard_error())
    }

    /// Estimate plus diagnostics, and a band when `alpha` is given.
    pub fn prediction(&self, alpha: Option<f64>) -> Result<PredictionResult> {
        let estimate = self.predict()?;
        let plug = self.plug_in_constants().ok();
        let (ci_low, ci_high) = match alpha {
            Some(a) => {
                let band = self.confidence_band(a)?;
                (Some(band.low), Some(band.high))
            }
            None => (None, None),
        };
        let f_hat_hn = self
            .history
            .last()
            .map(|a| self.reference.cdf(a.bandwidth))
            .unwrap_or(0.0);
        Ok(PredictionResult {
            estimate,
            ci_low,
            ci_high,
            diagnostics: Diagnostics {
                n: self.len(),
                f_hat_hn,
                m1: plug.map(|p| p.m1),
                m2: plug.map(|p| p.m2),
                beta1: plug.map(|p| p.beta1),
                sigma2: plug.map(|p| p.sigma2),
                effective_sample: self.sums.den_unw,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn sums(&self) -> &Sums {
        &self.sums
    }

    pub fn history(&self) -> &[Arrival] {
        &self.history
    }

    pub fn bandwidths(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().map(|a| a.bandwidth)
    }

    pub fn sorted_distances(&self) -> &[f64] {
        self.distances.as_slice()
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn seminorm(&self) -> &FittedSemiNorm {
        &self.seminorm
    }

    pub fn query(&self) -> &Curve {
        &self.query
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Structural checks applied to deserialized snapshots.
    pub(crate) fn check_consistency(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Integrity(what.to_string()));
        if self.distances.len() != self.history.len() {
            return fail("distance multiset and history differ in length");
        }
        if !self.distances.is_sorted() || !self.reference.is_sorted() {
            return fail("distances are not sorted");
        }
        if self.query_coords.len() != self.seminorm.dim() || self.query.grid() != self.seminorm.grid() {
            return fail("query does not match the semi-norm");
        }
        let s = &self.sums;
        let finite = [s.num, s.den, s.num_unw, s.num2_unw, s.den_unw, s.wsum, s.m1_sum, s.m2_sum, s.beta_sum];
        if finite.iter().any(|v| !v.is_finite()) && s.zero_cdf_terms == 0 {
            return fail("non-finite accumulator");
        }
        if s.den < 0.0 || s.den_unw < 0.0 {
            return fail("negative denominator");
        }
        self.config.validate()
    }
}

/// Adds the terms of one arrival to `sums`, weighting with `reference`.
fn accumulate(
    sums: &mut Sums,
    config: &EstimatorConfig,
    reference: &SortedDistances,
    arrival: &Arrival,
) -> Result<()> {
    let Arrival {
        distance: d,
        bandwidth: h,
        response: y,
    } = *arrival;
    let ell = config.ell;
    // d = 0 sits at the kernel's mode even when the bandwidth collapses to 0.
    let u = if d == 0.0 { 0.0 } else { d / h };
    let k = config.kernel.eval(u);
    let f = reference.cdf(h);

    let weight = if k > 0.0 {
        if ell == 0.0 {
            1.0
        } else if f > 0.0 {
            f.powf(-ell)
        } else {
            return Err(Error::DegenerateCdf(format!(
                "F̂(h) = 0 at bandwidth {h} but the kernel weight is positive"
            )));
        }
    } else {
        0.0
    };

    sums.wsum += f.powf(1.0 - ell);
    sums.beta_sum += f;
    if f == 0.0 {
        sums.zero_cdf_terms += 1;
    }
    if k > 0.0 {
        sums.num += y * k * weight;
        sums.den += k * weight;
        sums.num_unw += y * k;
        sums.num2_unw += y * y * k;
        sums.den_unw += k;
        if f > 0.0 {
            sums.m1_sum += k / f;
            sums.m2_sum += k * k / f;
        }
    }
    Ok(())
}

/// `r_n^[ℓ](χ)` from the distances `d_i = ‖χ − X_i‖` in arrival order, with
/// `F̂` and the sample scale taken from all of them. Agrees with
/// [`QueryState::from_distances`] followed by `predict` but stores nothing.
pub fn recursive_estimate_distances(
    distances: &[f64],
    responses: &[f64],
    config: &EstimatorConfig,
) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if distances.len() != responses.len() {
        return Err(Error::Dimension(format!(
            "{} distances but {} responses",
            distances.len(),
            responses.len()
        )));
    }
    // The weights only need F̂ when ℓ > 0; skip the sort otherwise.
    let reference = if config.ell > 0.0 {
        SortedDistances::from_unsorted(distances.to_vec())
    } else {
        SortedDistances::new()
    };
    let mut scale = match config.plan.scale {
        ScaleMode::Sample => distances.iter().cloned().fold(0.0, f64::max),
        ScaleMode::Fixed(s) => s,
        ScaleMode::Running => 0.0,
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (&d, &y)) in distances.iter().zip(responses).enumerate() {
        if config.plan.scale == ScaleMode::Running {
            scale = scale.max(d);
        }
        let h = config.plan.bandwidth(scale, i + 1);
        let u = if d == 0.0 { 0.0 } else { d / h };
        let k = config.kernel.eval(u);
        if k > 0.0 {
            let w = if config.ell == 0.0 {
                1.0
            } else {
                let f = reference.cdf(h);
                if f == 0.0 {
                    return Err(Error::DegenerateCdf(format!(
                        "F̂(h) = 0 at bandwidth {h} but the kernel weight is positive"
                    )));
                }
                f.powf(-config.ell)
            };
            num += y * k * w;
            den += k * w;
        }
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::EmptyNeighborhood)
    }
}
