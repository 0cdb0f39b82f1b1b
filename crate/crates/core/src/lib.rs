//! Recursive kernel regression on a functional covariate.
//!
//! Observations `(X_i, Y_i)` pair a curve sampled on a uniform grid of
//! `[0, 1]` with a scalar response. For a query curve `χ` the estimator
//!
//! ```text
//! r_n^[ℓ](χ) = Σ Y_i F̂(h_i)^{-ℓ} K(‖χ − X_i‖ / h_i) / Σ F̂(h_i)^{-ℓ} K(‖χ − X_i‖ / h_i)
//! ```
//!
//! uses a decreasing bandwidth `h_i` per observation, so it can be updated
//! as new observations arrive instead of being refitted. See
//! [`estimator::QueryState`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected together with
// nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod curves;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod parallel;
pub mod seminorms;
pub mod snapshot;
pub mod stats;

pub use error::{Error, Result};
