//! Seeded Rician noise synthesis.
//!
//! A magnitude image is `f = √((u + n₁)² + n₂²)` with `n₁, n₂ ~ N(0, σ²)`
//! independent. Row `i` draws its normals from `ChaCha8Rng` seeded with
//! `seed` on stream `i`, real part first, via the ziggurat sampler of
//! `rand_distr::StandardNormal`. The output therefore depends only on
//! `(clean, σ, seed)`, not on how rows are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::grid::Image;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(domain(format!("noise sigma must be positive, got {sigma}")));
        }
        Ok(NoiseSpec { sigma, seed })
    }
}

/// Corrupts `clean` with Rician noise. No clipping is applied.
pub fn add_rician(clean: &Image, spec: NoiseSpec) -> Result<Image> {
    let spec = NoiseSpec::new(spec.sigma, spec.seed)?;
    if clean.min() < 0.0 {
        return Err(domain("clean image must be nonnegative"));
    }
    let (n, m) = clean.shape();
    let src = clean.as_slice();
    let mut out = vec![0.0; n * m];
    par::rows1(&mut out, m, |i, row| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        for (j, o) in row.iter_mut().enumerate() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *o = (src[i * m + j] + spec.sigma * re).hypot(spec.sigma * im);
        }
    });
    Image::new(n, m, out)
}
