//! Asymptotic constants for a kernel and a small-ball law `τ₀(s) = s^κ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kernel::Kernel;

const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub kappa: f64,
    /// `K(1) − ∫₀¹ (sK(s))' τ₀(s) ds`
    pub m0: f64,
    /// `K(1) − ∫₀¹ K'(s) τ₀(s) ds`
    pub m1: f64,
    /// `K²(1) − ∫₀¹ (K²)'(s) τ₀(s) ds`
    pub m2: f64,
}

pub fn asymptotic_constants(kernel: Kernel, kappa: f64) -> Result<AsymptoticConstants> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("κ must be positive, got {kappa}")));
    }
    let tau = |s: f64| s.powf(kappa);
    let k1 = kernel.eval(1.0);
    let m0 = k1 - integrate(|s| (kernel.eval(s) + s * kernel.derivative(s)) * tau(s), 0.0, 1.0, QUAD_TOL);
    let m1 = k1 - integrate(|s| kernel.derivative(s) * tau(s), 0.0, 1.0, QUAD_TOL);
    let m2 = k1 * k1 - integrate(|s| 2.0 * kernel.eval(s) * kernel.derivative(s) * tau(s), 0.0, 1.0, QUAD_TOL);
    Ok(AsymptoticConstants { kappa, m0, m1, m2 })
}

impl AsymptoticConstants {
    /// `β_[r] = 1 / (1 − δκr)` for bandwidths `h_n ∝ n^{−δ}`.
    pub fn beta(&self, r: f64, delta: f64) -> Result<f64> {
        beta_limit(self.kappa, r, delta)
    }

    /// `α_[ℓ] = 1 / (1 − δ(1 + κ(1 − ℓ)))`, the limit of
    /// `(1/n) Σ (h_i/h_n) (F(h_i)/F(h_n))^{1−ℓ}`.
    pub fn alpha(&self, ell: f64, delta: f64) -> Result<f64> {
        let x = delta * (1.0 + self.kappa * (1.0 - ell));
        if x >= 1.0 {
            return Err(Error::Divergence(format!(
                "α_[{ell}] diverges: δ(1 + κ(1 − ℓ)) = {x} ≥ 1"
            )));
        }
        Ok(1.0 / (1.0 - x))
    }

    /// `β_[1−2ℓ] / β_[1−ℓ]² · M2 / M1²`, the limit of `nF(h_n) Var r̂`
    /// divided by `σ²_ε(χ)`.
    pub fn variance_factor(&self, ell: f64, delta: f64) -> Result<f64> {
        let b = self.beta(1.0 - ell, delta)?;
        Ok(self.beta(1.0 - 2.0 * ell, delta)? / (b * b) * self.m2 / (self.m1 * self.m1))
    }

    /// `α_[ℓ] / β_[1−ℓ] · M0 / M1`, the bias coefficient of `φ'(0) h_n`.
    pub fn bias_factor(&self, ell: f64, delta: f64) -> Result<f64> {
        Ok(self.alpha(ell, delta)? / self.beta(1.0 - ell, delta)? * self.m0 / self.m1)
    }
}

pub fn beta_limit(kappa: f64, r: f64, delta: f64) -> Result<f64> {
    let x = delta * kappa * r;
    if x >= 1.0 {
        return Err(Error::Divergence(format!("β_[{r}] diverges: δκr = {x} ≥ 1")));
    }
    Ok(1.0 / (1.0 - x))
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 48)
}
