use nalgebra::{DMatrix, SymmetricEigen};

use crate::curves::{Curve, Dataset};
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one count as zero.
pub(crate) const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Eigenfunctions {
    /// Orthonormal under the trapezoid inner product.
    pub directions: Vec<Curve>,
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
}

/// Leading `q` eigenpairs of `Γ_n u = (1/n) Σ ⟨X_i, u⟩ X_i`.
///
/// With `center`, the curves are centered at their mean first. The operator is
/// discretized as `W^{1/2} (XᵀX / n) W^{1/2}` with trapezoid weights `W`, so
/// its eigenvectors `v` map back to eigenfunctions `u = W^{-1/2} v`.
pub fn pca_eigenfunctions(data: &Dataset, q: usize, center: bool) -> Result<Eigenfunctions> {
    let grid = data.grid();
    let p = grid.len();
    let n = data.len();
    if q == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }

    let mean: Vec<f64> = if center {
        let mut m = vec![0.0; p];
        for c in data.curves() {
            m.iter_mut().zip(c.values()).for_each(|(m, v)| *m += v);
        }
        m.iter_mut().for_each(|m| *m /= n as f64);
        m
    } else {
        vec![0.0; p]
    };
    let root_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();

    let scaled = DMatrix::from_fn(n, p, |i, j| (data.curves()[i].values()[j] - mean[j]) * root_w[j]);
    let cov = scaled.tr_mul(&scaled) / n as f64;
    let eig = SymmetricEigen::new(cov);

    let lead = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| lead > 0.0 && l > RANK_TOL * lead)
        .count();
    if q > rank {
        return Err(Error::Rank(format!(
            "requested {q} principal components but the empirical covariance has rank {rank}"
        )));
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..p)
        .map(|k| {
            let mut u: Vec<f64> = eig
                .eigenvectors
                .column(k)
                .iter()
                .zip(&root_w)
                .map(|(v, r)| v / r)
                .collect();
            orient(&mut u);
            (eig.eigenvalues[k], u)
        })
        .collect();
    // Near-ties are ordered by where the direction first becomes significant,
    // making the output independent of the solver's internal ordering.
    let tie = RANK_TOL * lead.max(f64::MIN_POSITIVE);
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            leading_index(&a.1).cmp(&leading_index(&b.1))
        } else {
            b.0.total_cmp(&a.0)
        }
    });

    let (eigenvalues, directions) = pairs
        .into_iter()
        .take(q)
        .map(|(l, u)| (l, Curve::new(grid, u).expect("finite eigenvector")))
        .unzip();
    Ok(Eigenfunctions {
        directions,
        eigenvalues,
    })
}

fn leading_index(u: &[f64]) -> usize {
    let scale = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    u.iter()
        .position(|v| v.abs() > 1e-8 * scale)
        .unwrap_or(u.len())
}

/// Flips `u` so that its first significant coordinate is positive.
pub(crate) fn orient(u: &mut [f64]) {
    let k = leading_index(u);
    if k < u.len() && u[k] < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{inner_product, simulate_regression_sample, Grid};

    fn norm(c: &Curve) -> f64 {
        inner_product(c, c).unwrap().sqrt()
    }

    #[test]
    fn rank_one_data() {
        let grid = Grid::new(41).unwrap();
        let u = Curve::from_fn(grid, |t| (3.0 * t).sin() + 0.2).unwrap();
        let curves: Vec<Curve> = [1.0, -2.0, 0.5, 3.0].iter().map(|c| u.scale(*c)).collect();
        let data = Dataset::new(curves, None).unwrap();
        let eig = pca_eigenfunctions(&data, 1, false).unwrap();
        let nu = norm(&u);
        let dir = &eig.directions[0];
        let cos = inner_product(dir, &u).unwrap() / nu;
        assert!((cos.abs() - 1.0).abs() < 1e-10);
        // λ = (1/n) Σ c_i² ‖u‖²
        let expected = (1.0 + 4.0 + 0.25 + 9.0) / 4.0 * nu * nu;
        assert!((eig.eigenvalues[0] - expected).abs() < 1e-10 * expected);

        assert!(matches!(pca_eigenfunctions(&data, 2, false), Err(Error::Rank(_))));
    }

    #[test]
    fn identical_curves() {
        let grid = Grid::new(21).unwrap();
        let u = Curve::from_fn(grid, |t| 1.0 + t * t).unwrap();
        let data = Dataset::new(vec![u.clone(); 5], None).unwrap();
        let eig = pca_eigenfunctions(&data, 1, false).unwrap();
        let nu = norm(&u);
        assert!((eig.eigenvalues[0] - nu * nu).abs() < 1e-12);
        let diff = eig.directions[0].sub(&u.scale(1.0 / nu)).unwrap();
        assert!(norm(&diff) < 1e-10);
    }

    #[test]
    fn two_orthogonal_curves_tie() {
        // ⟨f, g⟩ = 0 and ‖f‖ = ‖g‖ = 1 on a trapezoid grid.
        let grid = Grid::new(33).unwrap();
        let f = Curve::from_fn(grid, |t| 2f64.sqrt() * (2.0 * std::f64::consts::PI * t).cos()).unwrap();
        let g = Curve::from_fn(grid, |t| 2f64.sqrt() * (2.0 * std::f64::consts::PI * t).sin()).unwrap();
        let curves: Vec<Curve> = (0..6).map(|i| if i % 2 == 0 { f.clone() } else { g.clone() }).collect();
        let data = Dataset::new(curves, None).unwrap();
        let eig = pca_eigenfunctions(&data, 2, false).unwrap();
        // Γ = ½ (f⊗f + g⊗g): two eigenvalues equal to ½.
        assert!((eig.eigenvalues[0] - 0.5).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 0.5).abs() < 1e-12);
        for d in &eig.directions {
            let in_plane = inner_product(d, &f).unwrap().powi(2) + inner_product(d, &g).unwrap().powi(2);
            assert!((in_plane - 1.0).abs() < 1e-10);
        }
        let again = pca_eigenfunctions(&data, 2, false).unwrap();
        assert_eq!(again.directions, eig.directions);
    }

    #[test]
    fn eigenvalues_nonincreasing_and_orthonormal() {
        let data = simulate_regression_sample(30, 40, 0.1, 5).unwrap();
        for center in [false, true] {
            let eig = pca_eigenfunctions(&data, 6, center).unwrap();
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            for (i, a) in eig.directions.iter().enumerate() {
                for (j, b) in eig.directions.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((inner_product(a, b).unwrap() - expected).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn directions_are_eigenfunctions() {
        let data = simulate_regression_sample(25, 30, 0.1, 8).unwrap();
        let eig = pca_eigenfunctions(&data, 2, false).unwrap();
        for (u, lambda) in eig.directions.iter().zip(&eig.eigenvalues) {
            // Γ_n u evaluated directly from its definition
            let mut gamma_u = vec![0.0; 30];
            for x in data.curves() {
                let c = inner_product(x, u).unwrap() / data.len() as f64;
                gamma_u.iter_mut().zip(x.values()).for_each(|(g, v)| *g += c * v);
            }
            for (g, v) in gamma_u.iter().zip(u.values()) {
                assert!((g - lambda * v).abs() < 1e-9);
            }
        }
    }
}
