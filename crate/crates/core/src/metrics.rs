//! PSNR and SSIM.
//!
//! SSIM uses the customary configuration: an 11×11
//! Gaussian window with standard deviation 1.5, `K₁ = 0.01`, `K₂ = 0.03`,
//! evaluated at every position where the window fits inside the image and
//! averaged.

use crate::error::{domain, Error, Result};
use crate::grid::Image;

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    /// Decibels; `+∞` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn compute(reference: &Image, test: &Image, peak: f64) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(reference, test, peak)?,
            ssim: ssim(reference, test, peak)?,
        })
    }
}

fn check_peak(peak: f64) -> Result<()> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(domain(format!("peak must be positive, got {peak}")));
    }
    Ok(())
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    reference.ensure_same_shape(test.shape())?;
    Ok(reference.distance(test).powi(2) / reference.len() as f64)
}

/// `10 log₁₀(peak² / MSE)`.
pub fn psnr(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    check_peak(peak)?;
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let centre = (SSIM_WINDOW / 2) as f64;
    for (k, t) in taps.iter_mut().enumerate() {
        let d = k as f64 - centre;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable "valid" filtering: output is `(n − 10) × (m − 10)`.
fn filter_valid(data: &[f64], n: usize, m: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let w = SSIM_WINDOW;
    let (on, om) = (n - w + 1, m - w + 1);
    let mut horiz = vec![0.0; n * om];
    for i in 0..n {
        for j in 0..om {
            let row = &data[i * m + j..i * m + j + w];
            horiz[i * om + j] = row.iter().zip(taps).map(|(a, t)| a * t).sum();
        }
    }
    let mut out = vec![0.0; on * om];
    for i in 0..on {
        for j in 0..om {
            out[i * om + j] = (0..w).map(|k| horiz[(i + k) * om + j] * taps[k]).sum();
        }
    }
    out
}

/// Mean structural similarity.
pub fn ssim(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    check_peak(peak)?;
    reference.ensure_same_shape(test.shape())?;
    let (n, m) = reference.shape();
    if n < SSIM_WINDOW || m < SSIM_WINDOW {
        return Err(Error::InvalidImage(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {n}x{m}"
        )));
    }
    let taps = gaussian_taps();
    let x = reference.as_slice();
    let y = test.as_slice();
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };
    let mu_x = filter_valid(x, n, m, &taps);
    let mu_y = filter_valid(y, n, m, &taps);
    let exx = filter_valid(&prod(x, x), n, m, &taps);
    let eyy = filter_valid(&prod(y, y), n, m, &taps);
    let exy = filter_valid(&prod(x, y), n, m, &taps);

    let c1 = (K1 * peak).powi(2);
    let c2 = (K2 * peak).powi(2);
    let mut total = 0.0;
    for k in 0..mu_x.len() {
        let (mx, my) = (mu_x[k], mu_y[k]);
        let vx = exx[k] - mx * mx;
        let vy = eyy[k] - my * my;
        let cov = exy[k] - mx * my;
        total +=
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{add_rician, NoiseSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_examples() {
        let a = Image::from_fn(8, 8, |i, j| (i * 8 + j) as f64);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        let zeros = Image::zeros(4, 4);
        let full = Image::filled(4, 4, 255.0);
        assert!(psnr(&zeros, &full, 255.0).unwrap().abs() < 1e-12);
        let shifted = a.map(|v| v + 5.0);
        let expected = 20.0 * 51f64.log10();
        assert!((psnr(&a, &shifted, 255.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 34.1514).abs() < 1e-4);
        assert!(psnr(&a, &Image::zeros(8, 7), 255.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn ssim_identical_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let a = Image::from_fn(20, 17, |_, _| rng.random_range(0.0..255.0));
        assert_eq!(ssim(&a, &a, 255.0).unwrap(), 1.0);
        let (ca, cb) = (100.0, 120.0);
        let c1 = (0.01f64 * 255.0).powi(2);
        let expected = (2.0 * ca * cb + c1) / (ca * ca + cb * cb + c1);
        let got = ssim(
            &Image::filled(12, 12, ca),
            &Image::filled(12, 12, cb),
            255.0,
        )
        .unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn ssim_errors() {
        let small = Image::zeros(10, 30);
        assert!(ssim(&small, &small, 255.0).is_err());
        assert!(ssim(&Image::zeros(11, 11), &Image::zeros(12, 11), 255.0).is_err());
    }

    #[test]
    fn ssim_degrades_with_noise() {
        let clean = crate::phantom::phantom(64, 64, 3);
        let light = add_rician(&clean, NoiseSpec::new(5.0, 1).unwrap()).unwrap();
        let heavy = add_rician(&clean, NoiseSpec::new(30.0, 1).unwrap()).unwrap();
        assert!(ssim(&clean, &heavy, 255.0).unwrap() < ssim(&clean, &light, 255.0).unwrap());
    }

    #[test]
    fn symmetry_range_and_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let a = Image::from_fn(15, 13, |_, _| rng.random_range(0.0..255.0));
            let b = Image::from_fn(15, 13, |_, _| rng.random_range(0.0..255.0));
            assert_eq!(psnr(&a, &b, 255.0).unwrap(), psnr(&b, &a, 255.0).unwrap());
            let (s1, s2) = (ssim(&a, &b, 255.0).unwrap(), ssim(&b, &a, 255.0).unwrap());
            assert!((s1 - s2).abs() < 1e-14);
            assert!((-1.0..=1.0).contains(&s1));
            let k: f64 = rng.random_range(0.5..20.0);
            let shifted = a.map(|v| v + k);
            let expected = 10.0 * (255.0f64 * 255.0 / (k * k)).log10();
            assert!((psnr(&a, &shifted, 255.0).unwrap() - expected).abs() < 1e-9);
        }
    }
}
