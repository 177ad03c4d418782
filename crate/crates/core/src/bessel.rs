//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Only the combinations the Rician model needs are exposed: the ratio
//! `r(s) = I₁(s)/I₀(s)`, `log I₀(s)` and `r'(s)`. Raw `I₀` overflows a double
//! near `s ≈ 713`, while the model routinely evaluates at `s = u f / σ²` in the
//! hundreds or beyond, so nothing here ever forms `I₀` or `I₁` for large `s`.
//!
//! Two branches:
//! - `s ≤ 15`: ascending power series of `I₀` and `I₁`.
//! - `s > 15`: the Hankel asymptotic expansions of `√(2πs) e⁻ˢ I_ν(s)`,
//!   truncated at the smallest term. At the seam the truncation error is
//!   about `e^{-2s} ≈ 1e-13`.

use crate::error::{domain, Result};

/// Largest argument evaluated with the power series.
pub const SERIES_LIMIT: f64 = 15.0;

const MAX_TERMS: usize = 200;

fn check(s: f64) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(domain(format!(
            "Bessel argument must be finite and nonnegative, got {s}"
        )));
    }
    Ok(s)
}

/// `I₁(s) / I₀(s)` for finite `s ≥ 0`.
///
/// The result lies in `[0, 1)` and obeys the enclosure
/// `s/(1+√(s²+1)) ≤ r(s) ≤ s/√(s²+4)`.
pub fn bessel_ratio(s: f64) -> Result<f64> {
    check(s).map(ratio)
}

/// `log I₀(s)` for finite `s ≥ 0`; nonnegative and below `s` for `s > 0`.
pub fn log_i0(s: f64) -> Result<f64> {
    check(s).map(log_i0_unchecked)
}

/// `r'(s)`, the derivative of [`bessel_ratio`], in `(0, 1/2]`.
///
/// Uses `r'(s) = 1 − r(s)/s − r(s)²` on the series branch and a direct
/// expansion on the asymptotic branch, where that identity cancels
/// catastrophically. `r'(0) = 1/2`.
pub fn ratio_derivative(s: f64) -> Result<f64> {
    check(s).map(ratio_derivative_unchecked)
}

/// Power series sums `(I₀(s), I₁(s))`.
fn series(s: f64) -> (f64, f64) {
    let q = 0.25 * s * s;
    // I₀ = Σ qᵏ/(k!)², I₁ = (s/2) Σ qᵏ/(k!(k+1)!)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut sum0 = 0.0;
    let mut sum1 = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        sum0 += t0;
        sum1 += t1;
        if t0 <= f64::EPSILON * 1e-2 * (1.0 + sum0) && t1 <= f64::EPSILON * 1e-2 * sum1 {
            break;
        }
    }
    // sum0 excludes the leading 1 so that log_i0 can use ln_1p near zero.
    (sum0, 0.5 * s * sum1)
}

/// Truncated Hankel expansions in `t = 1/s`.
///
/// Returns `(P, Q, dP/dt, dQ/dt)` with `I₀(s) ≈ eˢ P / √(2πs)` and
/// `I₁(s) ≈ eˢ Q / √(2πs)`.
fn hankel(s: f64) -> (f64, f64, f64, f64) {
    let t = 1.0 / s;
    let (mut c0, mut c1) = (1.0_f64, 1.0_f64);
    let (mut p, mut q, mut dp, mut dq) = (1.0, 1.0, 0.0, 0.0);
    // t^(k-1)
    let mut tk1 = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let odd2 = (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        let n0 = c0 * odd2 / (8.0 * kf);
        let n1 = c1 * (odd2 - 4.0) / (8.0 * kf);
        let term0 = n0 * tk1 * t;
        let term1 = n1 * tk1 * t;
        let size = term0.abs().max(term1.abs());
        // The series diverges past k ≈ 2s; stop at the smallest term.
        if size >= last {
            break;
        }
        p += term0;
        q += term1;
        dp += kf * n0 * tk1;
        dq += kf * n1 * tk1;
        c0 = n0;
        c1 = n1;
        tk1 *= t;
        last = size;
        if size <= f64::EPSILON * 1e-2 {
            break;
        }
    }
    (p, q, dp, dq)
}

pub(crate) fn ratio(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if s <= SERIES_LIMIT {
        let (i0m1, i1) = series(s);
        i1 / (1.0 + i0m1)
    } else {
        let (p, q, _, _) = hankel(s);
        q / p
    }
}

pub(crate) fn log_i0_unchecked(s: f64) -> f64 {
    if s <= SERIES_LIMIT {
        series(s).0.ln_1p()
    } else {
        let (p, _, _, _) = hankel(s);
        s - 0.5 * (2.0 * std::f64::consts::PI * s).ln() + p.ln()
    }
}

pub(crate) fn ratio_derivative_unchecked(s: f64) -> f64 {
    if s < 1e-2 {
        // Maclaurin series; the closed form below cancels badly near zero.
        let q = s * s;
        0.5 - q * (3.0 / 16.0 - q * (5.0 / 96.0 - q * (77.0 / 6144.0)))
    } else if s <= SERIES_LIMIT {
        let r = ratio(s);
        1.0 - r / s - r * r
    } else {
        // r = Q/P with t = 1/s, so dr/ds = -t² (Q'P − QP')/P².
        let (p, q, dp, dq) = hankel(s);
        let t = 1.0 / s;
        t * t * (q * dp - dq * p) / (p * p)
    }
}
