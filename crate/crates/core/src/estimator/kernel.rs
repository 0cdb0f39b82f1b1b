use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    /// `(1 − u²)` on `[0, 1]`.
    #[default]
    Quadratic,
    /// `1` on `[0, 1]`.
    Uniform,
}

/// A nonnegative bounded kernel supported on `[0, 1]`, optionally multiplied
/// by a positive constant.
///
/// The quadratic kernel vanishes at `u = 1`, so it does not satisfy a strictly
/// positive lower bound on its support; it is supported anyway since it is the
/// usual practical choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    shape: KernelShape,
    factor: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::quadratic()
    }
}

impl Kernel {
    pub const fn quadratic() -> Self {
        Kernel {
            shape: KernelShape::Quadratic,
            factor: 1.0,
        }
    }

    pub const fn uniform() -> Self {
        Kernel {
            shape: KernelShape::Uniform,
            factor: 1.0,
        }
    }

    pub fn scaled(self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel scale must be positive, got {c}"
            )));
        }
        Ok(Kernel {
            factor: self.factor * c,
            ..self
        })
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        self.factor
            * match self.shape {
                KernelShape::Quadratic => 1.0 - u * u,
                KernelShape::Uniform => 1.0,
            }
    }

    /// `K'(u)` on `[0, 1]`.
    pub fn derivative(&self, u: f64) -> f64 {
        self.factor
            * match self.shape {
                KernelShape::Quadratic => -2.0 * u,
                KernelShape::Uniform => 0.0,
            }
    }

    pub fn sup(&self) -> f64 {
        self.factor
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.shape {
            KernelShape::Quadratic => "quadratic",
            KernelShape::Uniform => "uniform",
        };
        if self.factor == 1.0 {
            write!(f, "{name}")
        } else {
            write!(f, "{name}*{}", self.factor)
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, factor) = match s.split_once('*') {
            Some((n, c)) => (
                n,
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad kernel scale in {s:?}")))?,
            ),
            None => (s, 1.0),
        };
        let base = match name.trim().to_ascii_lowercase().as_str() {
            "quadratic" | "epanechnikov" => Kernel::quadratic(),
            "uniform" => Kernel::uniform(),
            other => return Err(Error::InvalidArgument(format!("unknown kernel {other:?}"))),
        };
        if factor == 1.0 {
            Ok(base)
        } else {
            base.scaled(factor)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_and_values() {
        let k = Kernel::quadratic();
        assert_eq!(k.eval(0.0), 1.0);
        assert_eq!(k.eval(0.5), 0.75);
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(1.0001), 0.0);
        assert_eq!(k.eval(-0.1), 0.0);
        let u = Kernel::uniform();
        assert_eq!(u.eval(1.0), 1.0);
        assert_eq!(u.eval(1.5), 0.0);
        assert_eq!(u.eval(f64::INFINITY), 0.0);
    }

    #[test]
    fn parse_and_display() {
        for k in [Kernel::quadratic(), Kernel::uniform(), Kernel::uniform().scaled(2.5).unwrap()] {
            assert_eq!(k.to_string().parse::<Kernel>().unwrap(), k);
        }
        assert!("gaussian".parse::<Kernel>().is_err());
        assert!(Kernel::quadratic().scaled(0.0).is_err());
    }
}
