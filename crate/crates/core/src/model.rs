//! The Rician fidelity term and the discrete TV-Rician energies.
//!
//! Per pixel, with `s = u f / σ²`:
//!
//! ```text
//! h(u)   = (λ/2σ²) u² − λ log I₀(s)
//! h'(u)  = (λ/σ²) (u − r(s) f)
//! h''(u) = (λ/σ²) (1 − (f²/σ²) r'(s))
//! ```
//!
//! `h` is even in `u`; for negative `u` the odd extension of `r` is used.
//! When `f² > 2σ²` the fidelity is a double well with its minimum at the
//! positive root of `γ = r(γ f/σ²) f`.

use crate::bessel;
use crate::error::{domain, Result};
use crate::grid::{pow_magnitude, Image};
use crate::par;

/// Regularisation weight `λ` and Gaussian variance `σ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RicianParams {
    lambda: f64,
    sigma2: f64,
}

impl RicianParams {
    pub fn new(lambda: f64, sigma2: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(domain(format!("lambda must be positive, got {lambda}")));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(domain(format!("sigma^2 must be positive, got {sigma2}")));
        }
        Ok(RicianParams { lambda, sigma2 })
    }

    /// From the per-channel noise standard deviation `σ`.
    pub fn from_sigma(lambda: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(domain(format!("sigma must be positive, got {sigma}")));
        }
        RicianParams::new(lambda, sigma * sigma)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `λ/σ²`, the weight of the quadratic part.
    pub fn weight(&self) -> f64 {
        self.lambda / self.sigma2
    }

    pub fn h_prime(&self, u: f64, f: f64) -> f64 {
        self.weight() * (u - ratio_odd(u * f / self.sigma2) * f)
    }

    pub fn h_value(&self, u: f64, f: f64) -> f64 {
        0.5 * self.weight() * u * u
            - self.lambda * bessel::log_i0_unchecked((u * f / self.sigma2).abs())
    }

    pub fn h_double_prime(&self, u: f64, f: f64) -> f64 {
        let s = (u * f / self.sigma2).abs();
        self.weight() * (1.0 - f * f / self.sigma2 * bessel::ratio_derivative_unchecked(s))
    }

    /// Pixelwise `F'(u) = (λ/σ²) r(u f/σ²) f`.
    #[inline]
    pub(crate) fn f_gradient_at(&self, u: f64, f: f64) -> f64 {
        self.weight() * ratio_odd(u * f / self.sigma2) * f
    }
}

#[inline]
pub(crate) fn ratio_odd(s: f64) -> f64 {
    if s < 0.0 {
        -bessel::ratio(-s)
    } else {
        bessel::ratio(s)
    }
}

/// Parameters bound to a nonnegative datum `f`.
#[derive(Clone, Debug)]
pub struct RicianModel {
    pub params: RicianParams,
    datum: Image,
}

/// The terms of `E_p(u) = J_p(u) + (λ/2σ²)Σu² − λΣ log I₀(u f/σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub regularizer: f64,
    pub quadratic: f64,
    pub log_bessel: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(regularizer: f64, quadratic: f64, log_bessel: f64) -> Self {
        EnergyBreakdown {
            regularizer,
            quadratic,
            log_bessel,
            total: regularizer + quadratic - log_bessel,
        }
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(1.0..2.0).contains(&p) {
        return Err(domain(format!("p must lie in [1, 2), got {p}")));
    }
    Ok(())
}

impl RicianModel {
    pub fn new(params: RicianParams, datum: Image) -> Result<Self> {
        if let Some(k) = datum.as_slice().iter().position(|&v| v < 0.0) {
            return Err(domain(format!(
                "datum must be nonnegative, pixel ({}, {}) is {}",
                k / datum.cols(),
                k % datum.cols(),
                datum.as_slice()[k]
            )));
        }
        Ok(RicianModel { params, datum })
    }

    pub fn datum(&self) -> &Image {
        &self.datum
    }

    /// The discrete energy `E_p(u)` split into its terms.
    pub fn energy(&self, u: &Image, p: f64) -> Result<EnergyBreakdown> {
        check_p(p)?;
        self.datum.ensure_same_shape(u.shape())?;
        let (n, m) = u.shape();
        let us = u.as_slice();
        let fs = self.datum.as_slice();
        let prm = self.params;
        let parts = par::rows_ro(n, |i| {
            let (mut reg, mut quad, mut logb) = (0.0, 0.0, 0.0);
            for j in 0..m {
                let k = i * m + j;
                let gx = if i + 1 < n { us[k + m] - us[k] } else { 0.0 };
                let gy = if j + 1 < m { us[k + 1] - us[k] } else { 0.0 };
                reg += pow_magnitude((gx * gx + gy * gy).sqrt(), p);
                quad += us[k] * us[k];
                logb += bessel::log_i0_unchecked((us[k] * fs[k] / prm.sigma2).abs());
            }
            [reg, quad, logb]
        });
        let sum = |idx: usize| parts.iter().fold(0.0, |acc, r| acc + r[idx]);
        Ok(EnergyBreakdown::new(
            sum(0) / p,
            0.5 * prm.weight() * sum(1),
            prm.lambda * sum(2),
        ))
    }

    /// The convex pair `(G_p(u), F(u))` with `E_p = G_p − F`.
    pub fn dc_split(&self, u: &Image, p: f64) -> Result<(f64, f64)> {
        let e = self.energy(u, p)?;
        Ok((e.regularizer + e.quadratic, e.log_bessel))
    }

    /// Pixelwise `h'(u, f)`; the terms of the discrete stationarity residual.
    pub fn h_prime_image(&self, u: &Image) -> Result<Image> {
        self.datum.ensure_same_shape(u.shape())?;
        let data = u
            .as_slice()
            .iter()
            .zip(self.datum.as_slice())
            .map(|(&a, &f)| self.params.h_prime(a, f))
            .collect();
        Ok(Image::from_raw(u.rows(), u.cols(), data))
    }
}

/// True iff `max f ≤ √(2σ²)`, the regime where every pixel's fidelity is
/// convex and the zero image is the unique minimiser.
pub fn trivial_threshold(f: &Image, sigma2: f64) -> bool {
    f.max() <= (2.0 * sigma2).sqrt()
}

/// Minimiser `γ ≥ 0` of `t ↦ h(t)` for a constant datum `μ`.
///
/// Zero when `μ² ≤ 2σ²`. Otherwise `γ = s σ²/μ` where `s` is the unique
/// positive root of `s = r(s) μ²/σ²`; uniqueness comes from `r(s)/s` being
/// strictly decreasing. The enclosure of `r(s)/s` brackets the root, then
/// bisection and a Newton polish drive the residual below `1e-12`.
pub fn constant_fixed_point(mu: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(domain(format!("sigma^2 must be positive, got {sigma2}")));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(domain(format!(
            "mu must be finite and nonnegative, got {mu}"
        )));
    }
    if mu * mu <= 2.0 * sigma2 {
        return Ok(0.0);
    }
    let gain = mu * mu / sigma2;
    // Root of r(s)/s = k with k = 1/gain < 1/2. From
    // 1/(1+√(s²+1)) < r(s)/s < 1/√(s²+4):
    let k = 1.0 / gain;
    let lo_bound = ((1.0 / k - 1.0).powi(2) - 1.0).max(0.0).sqrt();
    let hi_bound = (1.0 / (k * k) - 4.0).max(0.0).sqrt();
    let residual = |s: f64| s - bessel::ratio(s) * gain;
    let mut lo = lo_bound * (1.0 - 1e-12);
    let mut hi = hi_bound * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    // residual < 0 below the root, > 0 above it
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..8 {
        let g = residual(s);
        if g.abs() <= 1e-14 * (1.0 + s) {
            break;
        }
        let dg = 1.0 - bessel::ratio_derivative_unchecked(s) * gain;
        let next = s - g / dg;
        if !(next > lo_bound * 0.5 && next.is_finite()) {
            break;
        }
        s = next;
    }
    Ok(s * sigma2 / mu)
}
