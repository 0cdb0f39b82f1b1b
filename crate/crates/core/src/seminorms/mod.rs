//! Semi-norms on the curve space.
//!
//! Every supported semi-norm is the Euclidean norm of a linear image of the
//! difference of two curves, `‖χ₁ − χ₂‖ = |P (χ₁ − χ₂)|`. Fitting builds the
//! matrix `P` once; afterwards curves can be projected to coordinates and
//! distances computed on those coordinates.

mod fourier;
mod pca;
mod pls;
mod spline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::{Curve, Dataset, Grid};
use crate::error::{Error, Result};

pub use fourier::fourier_basis;
pub use pca::{pca_eigenfunctions, Eigenfunctions};
pub use pls::pls_basis;
pub use spline::{spline_second_derivative, SecondDerivativeOperator};

pub const SEMINORM_FORMAT: &str = "funflow-seminorm";
pub const SEMINORM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SemiNormSpec {
    /// Projection on the leading eigenfunctions of the empirical covariance operator.
    Pca { q: usize, center: bool },
    /// Coefficients on the first `b` elements of the trigonometric basis.
    Fourier { b: usize },
    /// L² norm of the second derivative of a least-squares cubic spline fit.
    Deriv { knots: usize },
    /// Projection on PLS1 weight functions.
    Pls { components: usize, center: bool },
}

impl SemiNormSpec {
    pub fn pca(q: usize) -> Self {
        SemiNormSpec::Pca { q, center: false }
    }

    pub fn fourier(b: usize) -> Self {
        SemiNormSpec::Fourier { b }
    }

    pub fn deriv(knots: usize) -> Self {
        SemiNormSpec::Deriv { knots }
    }

    pub fn pls(components: usize) -> Self {
        SemiNormSpec::Pls {
            components,
            center: false,
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            SemiNormSpec::Pca { q, .. } => q,
            SemiNormSpec::Fourier { b } => b,
            SemiNormSpec::Deriv { knots } => knots,
            SemiNormSpec::Pls { components, .. } => components,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count() == 0 {
            return Err(Error::InvalidArgument(format!(
                "{self}: component count must be at least 1"
            )));
        }
        Ok(())
    }
}

impl Default for SemiNormSpec {
    fn default() -> Self {
        SemiNormSpec::pca(3)
    }
}

impl fmt::Display for SemiNormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SemiNormSpec::Pca { q, center } => {
                write!(f, "pca:{q}")?;
                if center {
                    write!(f, ":centered")?;
                }
                Ok(())
            }
            SemiNormSpec::Fourier { b } => write!(f, "fou:{b}"),
            SemiNormSpec::Deriv { knots } => write!(f, "deriv:{knots}"),
            SemiNormSpec::Pls { components, center } => {
                write!(f, "pls:{components}")?;
                if center {
                    write!(f, ":centered")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `pca`, `pca:3`, `pca:3:centered`, `fou:8`, `deriv:8`, `pls:5`.
impl FromStr for SemiNormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let count = parts
            .next()
            .map(|c| {
                c.parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad component count in {s:?}")))
            })
            .transpose()?;
        let center = match parts.next() {
            None => false,
            Some("centered") | Some("center") => true,
            Some(other) => {
                return Err(Error::InvalidArgument(format!(
                    "unknown semi-norm option {other:?}"
                )))
            }
        };
        if parts.next().is_some() {
            return Err(Error::InvalidArgument(format!("malformed semi-norm {s:?}")));
        }
        let spec = match kind.as_str() {
            "pca" => SemiNormSpec::Pca {
                q: count.unwrap_or(3),
                center,
            },
            "pls" => SemiNormSpec::Pls {
                components: count.unwrap_or(5),
                center,
            },
            "fou" | "fourier" if !center => SemiNormSpec::Fourier {
                b: count.unwrap_or(8),
            },
            "deriv" if !center => SemiNormSpec::Deriv {
                knots: count.unwrap_or(8),
            },
            _ => return Err(Error::InvalidArgument(format!("unknown semi-norm {s:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A fitted distance functional between curves on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSemiNorm {
    spec: SemiNormSpec,
    grid: Grid,
    /// Directions `ν_j`, `p_j` or Fourier elements; empty for the derivative semi-norm.
    basis: Vec<Curve>,
    /// Eigenvalues of the covariance operator for PCA, empty otherwise.
    eigenvalues: Vec<f64>,
    /// Rows of the linear map `P`, each of length `grid.len()`.
    projector: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    seminorm: T,
}

impl FittedSemiNorm {
    pub fn fit(spec: SemiNormSpec, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        let grid = data.grid();
        let weights = grid.weights();
        let directions_projector = |basis: &[Curve]| -> Vec<Vec<f64>> {
            basis
                .iter()
                .map(|u| u.values().iter().zip(&weights).map(|(u, w)| u * w).collect())
                .collect()
        };
        match spec {
            SemiNormSpec::Pca { q, center } => {
                let eig = pca_eigenfunctions(data, q, center)?;
                let projector = directions_projector(&eig.directions);
                Ok(FittedSemiNorm {
                    spec,
                    grid,
                    basis: eig.directions,
                    eigenvalues: eig.eigenvalues,
                    projector,
                })
            }
            SemiNormSpec::Pls { components, center } => {
                let basis = pls_basis(data, components, center)?;
                let projector = directions_projector(&basis);
                Ok(FittedSemiNorm {
                    spec,
                    grid,
                    basis,
                    eigenvalues: Vec::new(),
                    projector,
                })
            }
            SemiNormSpec::Fourier { b } => {
                let basis = fourier_basis(grid, b);
                let projector = directions_projector(&basis);
                Ok(FittedSemiNorm {
                    spec,
                    grid,
                    basis,
                    eigenvalues: Vec::new(),
                    projector,
                })
            }
            SemiNormSpec::Deriv { knots } => {
                let op = SecondDerivativeOperator::new(grid, knots)?;
                Ok(FittedSemiNorm {
                    spec,
                    grid,
                    basis: Vec::new(),
                    eigenvalues: Vec::new(),
                    projector: op.l2_factor(),
                })
            }
        }
    }

    pub fn spec(&self) -> SemiNormSpec {
        self.spec
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn basis(&self) -> &[Curve] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Dimension of the coordinate space curves are projected into.
    pub fn dim(&self) -> usize {
        self.projector.len()
    }

    fn check(&self, curve: &Curve) -> Result<()> {
        if curve.grid() != self.grid {
            return Err(Error::Dimension(format!(
                "semi-norm was fitted on {} grid points, curve has {}",
                self.grid.len(),
                curve.grid().len()
            )));
        }
        Ok(())
    }

    /// Coordinates `P χ`; distances between curves equal Euclidean distances
    /// between their coordinates.
    pub fn project(&self, curve: &Curve) -> Result<Vec<f64>> {
        self.check(curve)?;
        Ok(self
            .projector
            .iter()
            .map(|row| row.iter().zip(curve.values()).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn project_all(&self, curves: &[Curve]) -> Result<Vec<Vec<f64>>> {
        curves.iter().map(|c| self.project(c)).collect()
    }

    pub fn distance(&self, a: &Curve, b: &Curve) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        Ok(self
            .projector
            .iter()
            .map(|row| {
                let c: f64 = row.iter().zip(&diff).map(|(a, b)| a * b).sum();
                c * c
            })
            .sum::<f64>()
            .sqrt())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: SEMINORM_FORMAT.to_string(),
            version: SEMINORM_VERSION,
            seminorm: self,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope<serde_json::Value> = serde_json::from_str(s)?;
        if env.format != SEMINORM_FORMAT || env.version != SEMINORM_VERSION {
            return Err(Error::SnapshotVersion {
                expected: format!("{SEMINORM_FORMAT} v{SEMINORM_VERSION}"),
                found: format!("{} v{}", env.format, env.version),
            });
        }
        let fitted: FittedSemiNorm = serde_json::from_value(env.seminorm)?;
        if fitted.projector.iter().any(|r| r.len() != fitted.grid.len()) {
            return Err(Error::Integrity("projector rows do not match the grid".into()));
        }
        Ok(fitted)
    }
}

/// Euclidean distance between projected coordinates.
#[inline]
pub fn coordinate_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
