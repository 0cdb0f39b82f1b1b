//! The non-recursive kernel estimator with a single bandwidth.

use crate::curves::{Curve, Dataset};
use crate::error::{Error, Result};
use crate::seminorms::{coordinate_distance, FittedSemiNorm};

use super::cdf::SortedDistances;
use super::kernel::Kernel;
use super::state::PlugIn;

/// `Σ Y_i K(d_i/h) / Σ K(d_i/h)` with `d_i = ‖χ − X_i‖`.
pub fn batch_estimate(
    chi: &Curve,
    data: &Dataset,
    kernel: Kernel,
    h: f64,
    seminorm: &FittedSemiNorm,
) -> Result<f64> {
    let y = data.require_responses("the kernel estimator")?;
    let q = seminorm.project(chi)?;
    let d = data
        .curves()
        .iter()
        .map(|x| seminorm.project(x).map(|c| coordinate_distance(&q, &c)))
        .collect::<Result<Vec<f64>>>()?;
    batch_estimate_distances(&d, y, kernel, h)
}

pub fn batch_estimate_distances(distances: &[f64], responses: &[f64], kernel: Kernel, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&d, &y) in distances.iter().zip(responses) {
        let k = kernel.eval(d / h);
        num += y * k;
        den += k;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::EmptyNeighborhood)
    }
}

/// Non-recursive counterparts of the plug-in constants: every `h_i` replaced
/// by the single bandwidth `h`, so `β̂ = 1`.
pub fn batch_plug_in(distances: &[f64], responses: &[f64], kernel: Kernel, h: f64) -> Result<PlugIn> {
    if distances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cdf = SortedDistances::from_unsorted(distances.to_vec());
    let f_hat = cdf.cdf(h);
    if f_hat == 0.0 {
        return Err(Error::DegenerateCdf(format!("F̂({h}) = 0")));
    }
    let (mut k1, mut k2, mut num, mut num2) = (0.0, 0.0, 0.0, 0.0);
    for (&d, &y) in distances.iter().zip(responses) {
        let k = kernel.eval(d / h);
        k1 += k;
        k2 += k * k;
        num += y * k;
        num2 += y * y * k;
    }
    if !(k1 > 0.0) {
        return Err(Error::EmptyNeighborhood);
    }
    let n = distances.len();
    let mean = num / k1;
    Ok(PlugIn {
        m1: k1 / (n as f64 * f_hat),
        m2: k2 / (n as f64 * f_hat),
        beta1: 1.0,
        sigma2: (num2 / k1 - mean * mean).max(0.0),
        f_hat,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_single_point() {
        let d = [0.1, 0.4, 0.9, 2.0];
        assert_eq!(batch_estimate_distances(&d, &[3.0; 4], Kernel::quadratic(), 1.0).unwrap(), 3.0);
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(batch_estimate_distances(&d, &y, Kernel::quadratic(), 0.2).unwrap(), 1.0);
        assert!(matches!(
            batch_estimate_distances(&d, &y, Kernel::quadratic(), 0.05),
            Err(Error::EmptyNeighborhood)
        ));
    }

    #[test]
    fn plug_in_uniform() {
        let d = [0.1, 0.2, 0.3];
        let p = batch_plug_in(&d, &[1.0, 1.0, 1.0], Kernel::uniform(), 1.0).unwrap();
        assert_eq!((p.m1, p.m2, p.beta1, p.sigma2), (1.0, 1.0, 1.0, 0.0));
    }
}
