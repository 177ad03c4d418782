//! Total-variation denoising of Rician-corrupted magnitude images.
//!
//! The non-convex TV-Rician energy
//!
//! ```text
//! E_p(u) = (1/p) Σ|∇u|^p + (λ/2σ²) Σ u² − λ Σ log I₀(u f / σ²)
//! ```
//!
//! is written as a difference of convex functions `G_p − F` and minimised by
//! a proximal point iteration whose proximal step is solved with a
//! primal-dual inner loop. `p = 1` is the TV model,
//! `1 < p < 2` its p-Laplacian relaxations.
//!
//! Modules:
//! - [`bessel`]: overflow-free `I₁/I₀`, `log I₀` and the ratio derivative.
//! - [`grid`]: images, vector fields, forward-difference gradient and its adjoint.
//! - [`model`]: the Rician fidelity `h`, its derivatives, energies and thresholds.
//! - [`noise`]: seeded Rician noise synthesis.
//! - [`solver`]: the proximal point outer loop and the primal-dual inner solver.
//! - [`metrics`]: PSNR and SSIM.
//! - [`io`], [`phantom`], [`cli`]: file formats, test images and the command-line front end.
//!
//! Per-pixel kernels run on rayon when the `parallel` feature (default) is on.
//! Reductions are always summed row by row in a fixed order, so results are
//! bitwise identical with or without the feature and for any thread count.

pub mod bessel;
pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod model;
pub mod noise;
mod par;
pub mod phantom;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Image, VectorField};
pub use model::{EnergyBreakdown, RicianModel, RicianParams};
pub use solver::{SolveReport, SolverConfig};
