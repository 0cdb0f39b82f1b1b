use crate::curves::{weighted_dot, Curve, Dataset};
use crate::error::{Error, Result};

use super::pca::{orient, RANK_TOL};

/// PLS1 weight functions for `K` components, orthonormal under the trapezoid
/// inner product.
///
/// Responses are always centered (the first weight is the empirical
/// cross-covariance direction); `center` additionally centers the curves.
/// Only the curve block is deflated.
pub fn pls_basis(data: &Dataset, k: usize, center: bool) -> Result<Vec<Curve>> {
    let y = data.require_responses("a PLS semi-norm")?;
    if k == 0 {
        return Err(Error::InvalidArgument("PLS needs at least one component".into()));
    }
    let grid = data.grid();
    let w = grid.weights();
    let p = grid.len();
    let n = data.len() as f64;

    let y_mean = y.iter().sum::<f64>() / n;
    let y: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut x: Vec<Vec<f64>> = data.curves().iter().map(|c| c.values().to_vec()).collect();
    if center {
        let mut mean = vec![0.0; p];
        for row in &x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
        }
        for row in &mut x {
            row.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
        }
    }

    let raw_y: f64 = data.responses().unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_x = x
        .iter()
        .map(|r| weighted_dot(&w, r, r).sqrt())
        .fold(0.0_f64, f64::max);
    let scale = (raw_y * max_x).max(f64::MIN_POSITIVE);

    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(k);
    for comp in 0..k {
        let mut dir = vec![0.0; p];
        for (row, yi) in x.iter().zip(&y) {
            dir.iter_mut().zip(row).for_each(|(d, v)| *d += yi * v);
        }
        let norm = weighted_dot(&w, &dir, &dir).sqrt();
        if !(norm > RANK_TOL * scale) {
            return Err(Error::Rank(format!(
                "PLS component {} has no remaining cross-covariance with the responses",
                comp + 1
            )));
        }
        dir.iter_mut().for_each(|d| *d /= norm);

        let scores: Vec<f64> = x.iter().map(|row| weighted_dot(&w, row, &dir)).collect();
        let tt: f64 = scores.iter().map(|t| t * t).sum();
        if !(tt > 0.0) {
            return Err(Error::Rank(format!("PLS component {} has zero scores", comp + 1)));
        }
        let mut loading = vec![0.0; p];
        for (row, t) in x.iter().zip(&scores) {
            loading.iter_mut().zip(row).for_each(|(l, v)| *l += t * v / tt);
        }
        for (row, t) in x.iter_mut().zip(&scores) {
            row.iter_mut().zip(&loading).for_each(|(v, l)| *v -= t * l);
        }
        weights.push(dir);
    }

    // NIPALS weights are orthogonal in exact arithmetic; re-orthonormalize to
    // remove rounding drift.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (comp, mut v) in weights.into_iter().enumerate() {
        for _ in 0..2 {
            for b in &basis {
                let c = weighted_dot(&w, &v, b);
                v.iter_mut().zip(b).for_each(|(v, b)| *v -= c * b);
            }
        }
        let norm = weighted_dot(&w, &v, &v).sqrt();
        if !(norm > 1e-8) {
            return Err(Error::Rank(format!(
                "PLS component {} is linearly dependent on earlier ones",
                comp + 1
            )));
        }
        v.iter_mut().for_each(|v| *v /= norm);
        basis.push(v);
    }

    Ok(basis
        .into_iter()
        .map(|mut v| {
            orient(&mut v);
            Curve::new(grid, v).expect("finite PLS direction")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{inner_product, simulate_regression_sample, Grid};
    use crate::seminorms::{FittedSemiNorm, SemiNormSpec};

    #[test]
    fn first_direction_recovers_linear_functional() {
        // X_i = a_i w + b_i g with w ⟂ g and Σ a_i b_i = 0, so the empirical
        // cross-covariance Σ Y_i X_i with Y_i = ⟨X_i, w⟩ is parallel to w.
        let grid = Grid::new(51).unwrap();
        let w = Curve::from_fn(grid, |t| 2f64.sqrt() * (2.0 * std::f64::consts::PI * t).cos()).unwrap();
        let g = Curve::from_fn(grid, |t| 2f64.sqrt() * (4.0 * std::f64::consts::PI * t).sin()).unwrap();
        let pairs = [(1.0, 1.0), (-1.0, 1.0), (2.0, -0.5), (-2.0, -0.5), (0.5, 3.0), (-0.5, 3.0)];
        let curves: Vec<Curve> = pairs
            .iter()
            .map(|(a, b)| {
                Curve::new(
                    grid,
                    w.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect(),
                )
                .unwrap()
            })
            .collect();
        let y: Vec<f64> = curves.iter().map(|x| inner_product(x, &w).unwrap()).collect();
        let data = Dataset::new(curves, Some(y)).unwrap();

        let basis = pls_basis(&data, 1, false).unwrap();
        let cos = inner_product(&basis[0], &w).unwrap();
        assert!((cos.abs() - 1.0).abs() < 1e-10);

        let s = FittedSemiNorm::fit(SemiNormSpec::pls(1), &data).unwrap();
        let a = Curve::from_fn(grid, |t| t * t).unwrap();
        let b = Curve::from_fn(grid, |t| (5.0 * t).sin()).unwrap();
        let direct = inner_product(&a.sub(&b).unwrap(), &w).unwrap().abs();
        assert!((s.distance(&a, &b).unwrap() - direct).abs() < 1e-8);
    }

    #[test]
    fn constant_responses_have_no_direction() {
        let data = simulate_regression_sample(20, 30, 0.1, 1).unwrap();
        let flat = Dataset::new(data.curves().to_vec(), Some(vec![0.1; 20])).unwrap();
        assert!(matches!(pls_basis(&flat, 1, false), Err(Error::Rank(_))));
    }

    #[test]
    fn directions_are_orthonormal() {
        let data = simulate_regression_sample(50, 40, 0.1, 3).unwrap();
        for center in [false, true] {
            let basis = pls_basis(&data, 5, center).unwrap();
            assert_eq!(basis.len(), 5);
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((inner_product(a, b).unwrap() - expected).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn too_many_components_for_the_sample() {
        let data = simulate_regression_sample(3, 20, 0.1, 3).unwrap();
        assert!(matches!(pls_basis(&data, 4, false), Err(Error::Rank(_))));
    }
}
