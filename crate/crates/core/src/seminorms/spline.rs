use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::curves::{Curve, Grid};
use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// Clamped cubic knot vector with `k` equispaced interior knots on `[0, 1]`.
fn knot_vector(k: usize) -> Vec<f64> {
    let mut t = vec![0.0; DEGREE + 1];
    t.extend((1..=k).map(|j| j as f64 / (k + 1) as f64));
    t.extend([1.0; DEGREE + 1]);
    t
}

/// Values of the `deriv`-th derivative of all degree-`degree` B-splines at `x`.
fn bspline_basis(knots: &[f64], degree: usize, deriv: usize, x: f64) -> Vec<f64> {
    let count = knots.len() - degree - 1;
    if deriv > degree {
        return vec![0.0; count];
    }
    if degree == 0 {
        // Half-open spans, except that x = 1 belongs to the last nonempty span.
        let last = (0..knots.len() - 1)
            .rev()
            .find(|&i| knots[i] < knots[i + 1])
            .unwrap_or(0);
        return (0..count)
            .map(|i| {
                let inside = knots[i] <= x && x < knots[i + 1];
                let at_end = i == last && x == knots[i + 1];
                if inside || at_end {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let lower = bspline_basis(knots, degree - 1, deriv.saturating_sub(1), x);
    (0..count)
        .map(|i| {
            let (a, b) = (lower[i], lower[i + 1]);
            let left = knots[i + degree] - knots[i];
            let right = knots[i + degree + 1] - knots[i + 1];
            if deriv == 0 {
                ratio(x - knots[i], left) * a + ratio(knots[i + degree + 1] - x, right) * b
            } else {
                degree as f64 * (ratio(a, left) - ratio(b, right))
            }
        })
        .collect()
}

/// Linear map from a curve to the second derivative of its least-squares
/// cubic B-spline fit, evaluated on the same grid.
#[derive(Debug, Clone)]
pub struct SecondDerivativeOperator {
    grid: Grid,
    /// `(BᵀB)⁻¹Bᵀ`: grid values to spline coefficients.
    smoother: DMatrix<f64>,
    /// Second derivatives of the basis on the grid.
    second: DMatrix<f64>,
}

impl SecondDerivativeOperator {
    pub fn new(grid: Grid, interior_knots: usize) -> Result<Self> {
        let p = grid.len();
        let nb = interior_knots + DEGREE + 1;
        if p < nb {
            return Err(Error::Rank(format!(
                "a cubic spline with {interior_knots} interior knots needs at least {nb} grid points, got {p}"
            )));
        }
        let knots = knot_vector(interior_knots);
        let points = grid.points();
        let mut basis = DMatrix::zeros(p, nb);
        let mut second = DMatrix::zeros(p, nb);
        for (j, &t) in points.iter().enumerate() {
            for (c, v) in bspline_basis(&knots, DEGREE, 0, t).into_iter().enumerate() {
                basis[(j, c)] = v;
            }
            for (c, v) in bspline_basis(&knots, DEGREE, 2, t).into_iter().enumerate() {
                second[(j, c)] = v;
            }
        }
        let gram = basis.tr_mul(&basis);
        let chol = gram.cholesky().ok_or_else(|| {
            Error::Rank(format!(
                "spline design with {interior_knots} interior knots is singular on {p} points"
            ))
        })?;
        let smoother = chol.solve(&basis.transpose());
        Ok(SecondDerivativeOperator {
            grid,
            smoother,
            second,
        })
    }

    pub fn apply(&self, curve: &Curve) -> Result<Curve> {
        if curve.grid() != self.grid {
            return Err(Error::Dimension(format!(
                "operator built for {} grid points, curve has {}",
                self.grid.len(),
                curve.grid().len()
            )));
        }
        let coef = &self.smoother * DVector::from_column_slice(curve.values());
        let d2 = &self.second * coef;
        Curve::new(self.grid, d2.iter().copied().collect())
    }

    /// Rows `L` with `|L x|² = Σ_j w_j (D x)_j²`, the trapezoid L² norm of the
    /// spline second derivative. Computed in coefficient space, where the
    /// quadratic form has rank at most (basis size − 2).
    pub(crate) fn l2_factor(&self) -> Vec<Vec<f64>> {
        let w = DVector::from_vec(self.grid.weights());
        let weighted = DMatrix::from_fn(self.second.nrows(), self.second.ncols(), |j, c| {
            self.second[(j, c)] * w[j]
        });
        let form = self.second.tr_mul(&weighted);
        let form = (&form + form.transpose()) * 0.5;
        let eig = SymmetricEigen::new(form);
        let lead = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let mut rows = Vec::new();
        for k in 0..eig.eigenvalues.len() {
            let mu = eig.eigenvalues[k];
            if mu > 1e-12 * lead {
                let v = eig.eigenvectors.column(k);
                let row = v.transpose() * &self.smoother * mu.sqrt();
                rows.push((mu, row.iter().copied().collect::<Vec<f64>>()));
            }
        }
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        rows.into_iter().map(|(_, r)| r).collect()
    }
}

/// Second derivative of the least-squares cubic spline fit with `k` interior knots.
pub fn spline_second_derivative(chi: &Curve, k: usize) -> Result<Curve> {
    SecondDerivativeOperator::new(chi.grid(), k)?.apply(chi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_error(c: &Curve, f: impl Fn(f64) -> f64) -> f64 {
        c.values()
            .iter()
            .zip(c.grid().points())
            .map(|(v, t)| (v - f(t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn partition_of_unity() {
        let knots = knot_vector(5);
        for x in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let s: f64 = bspline_basis(&knots, 3, 0, x).iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "{x}: {s}");
            let d: f64 = bspline_basis(&knots, 3, 2, x).iter().sum();
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_has_constant_second_derivative() {
        let grid = Grid::new(100).unwrap();
        let chi = Curve::from_fn(grid, |t| t * t).unwrap();
        let d2 = spline_second_derivative(&chi, 8).unwrap();
        assert!(sup_error(&d2, |_| 2.0) < 1e-6);
    }

    #[test]
    fn affine_has_zero_second_derivative() {
        let grid = Grid::new(60).unwrap();
        let chi = Curve::from_fn(grid, |t| 4.0 - 3.0 * t).unwrap();
        let d2 = spline_second_derivative(&chi, 8).unwrap();
        assert!(sup_error(&d2, |_| 0.0) < 1e-6);
    }

    #[test]
    fn cubic_is_reproduced() {
        let grid = Grid::new(100).unwrap();
        let chi = Curve::from_fn(grid, |t| t * t * t).unwrap();
        let d2 = spline_second_derivative(&chi, 8).unwrap();
        assert!(sup_error(&d2, |t| 6.0 * t) < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let grid = Grid::new(11).unwrap();
        let chi = Curve::from_fn(grid, |t| t).unwrap();
        assert!(matches!(spline_second_derivative(&chi, 8), Err(Error::Rank(_))));
        assert!(spline_second_derivative(&Curve::from_fn(Grid::new(12).unwrap(), |t| t).unwrap(), 8).is_ok());
    }

    #[test]
    fn factor_matches_trapezoid_norm() {
        let grid = Grid::new(50).unwrap();
        let op = SecondDerivativeOperator::new(grid, 8).unwrap();
        let rows = op.l2_factor();
        assert_eq!(rows.len(), 10);
        let chi = Curve::from_fn(grid, |t| (7.0 * t).sin() + t.powi(4)).unwrap();
        let d2 = op.apply(&chi).unwrap();
        let direct: f64 = grid.integrate(&d2.values().iter().map(|v| v * v).collect::<Vec<_>>());
        let via: f64 = rows
            .iter()
            .map(|r| r.iter().zip(chi.values()).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum();
        assert!((direct - via).abs() < 1e-9 * direct);
    }
}
