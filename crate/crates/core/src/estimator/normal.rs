use statrs::distribution::{ContinuousCDF, Normal};

/// Quantile of the standard normal distribution, `Φ⁻¹(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal parameters are valid")
        .inverse_cdf(p)
}
