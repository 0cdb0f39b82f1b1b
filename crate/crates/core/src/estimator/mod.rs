//! Recursive kernel estimators of `r(χ) = E[Y | X = χ]`.

mod batch;
mod cdf;
mod constants;
mod kernel;
mod normal;
mod state;

pub use batch::{batch_estimate, batch_estimate_distances, batch_plug_in};
pub use cdf::SortedDistances;
pub use constants::{asymptotic_constants, beta_limit, integrate, AsymptoticConstants};
pub use kernel::{Kernel, KernelShape};
pub use normal::normal_quantile;
pub use state::{
    band_half_width, recursive_estimate_distances, Arrival, CdfPolicy, ConfidenceBand, Diagnostics,
    EstimatorConfig, PlugIn, PredictionResult, QueryState, Sums,
};
