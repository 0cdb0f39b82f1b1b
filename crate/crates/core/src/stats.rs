//! Summary statistics for Monte Carlo output.

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (divisor `n − 1`); 0 for fewer than two values.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

/// Moment skewness `m3 / m2^{3/2}`.
pub fn skewness(x: &[f64]) -> f64 {
    central_moment(x, 3) / central_moment(x, 2).powf(1.5)
}

/// Moment excess kurtosis `m4 / m2² − 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m2 = central_moment(x, 2);
    central_moment(x, 4) / (m2 * m2) - 3.0
}

/// Least-squares fit `y ≈ a + b x`; returns `(a, b)`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("a line fit needs at least two paired points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("a line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(ols(&lx, &ly)?.1)
}

/// Small-ball exponent `κ̂` from the slope of `log F̂(t)` against `log t`,
/// with `t` running over the order statistics `d_(k)`,
/// `k = 1..⌈fraction · n⌉`, where `F̂(d_(k)) = k / n`.
pub fn small_ball_exponent(distances: &[f64], fraction: f64) -> Result<f64> {
    let mut d: Vec<f64> = distances.iter().copied().filter(|v| *v > 0.0).collect();
    d.sort_by(f64::total_cmp);
    let n = distances.len() as f64;
    let m = ((fraction * d.len() as f64).ceil() as usize).min(d.len());
    if m < 3 {
        return Err(Error::InvalidArgument("too few positive distances to estimate κ".into()));
    }
    let t: Vec<f64> = d[..m].to_vec();
    let f: Vec<f64> = (1..=m).map(|k| (k as f64 + (n - d.len() as f64)) / n).collect();
    log_log_slope(&t, &f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((std_dev(&x) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(skewness(&x).abs() < 1e-15);
        // Uniform on four points: m4/m2² = 2.5625/1.5625 = 1.64
        assert!((excess_kurtosis(&x) - (1.64 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn line_fit() {
        let x = [1.0f64, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn exponent_of_uniform_distances() {
        // d_(k) = k/n exactly gives F̂(t) = t, κ = 1.
        let d: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
        assert!((small_ball_exponent(&d, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }
}
