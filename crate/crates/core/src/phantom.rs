//! Seeded piecewise-constant test images.
//!
//! A dark background, a large elliptical "head" and a handful of random
//! ellipses and rectangles inside it, all with flat intensities in `[0, 255]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Image;

enum Shape {
    Ellipse { ci: f64, cj: f64, ri: f64, rj: f64 },
    Rect { i0: f64, i1: f64, j0: f64, j1: f64 },
}

impl Shape {
    fn contains(&self, i: f64, j: f64) -> bool {
        match *self {
            Shape::Ellipse { ci, cj, ri, rj } => {
                ((i - ci) / ri).powi(2) + ((j - cj) / rj).powi(2) <= 1.0
            }
            Shape::Rect { i0, i1, j0, j1 } => i >= i0 && i <= i1 && j >= j0 && j <= j1,
        }
    }
}

/// Builds a `rows × cols` phantom; equal seeds give equal images.
pub fn phantom(rows: usize, cols: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (rows as f64, cols as f64);
    let mut shapes = vec![(
        Shape::Ellipse {
            ci: 0.5 * n,
            cj: 0.5 * m,
            ri: 0.42 * n,
            rj: 0.38 * m,
        },
        rng.random_range(50.0..80.0),
    )];
    let count = rng.random_range(5..9);
    for k in 0..count {
        let ci = rng.random_range(0.3..0.7) * n;
        let cj = rng.random_range(0.3..0.7) * m;
        let hi = rng.random_range(0.05..0.18) * n;
        let hj = rng.random_range(0.05..0.18) * m;
        let level = rng.random_range(100.0..240.0_f64).round();
        let shape = if k % 3 == 2 {
            Shape::Rect {
                i0: ci - hi,
                i1: ci + hi,
                j0: cj - hj,
                j1: cj + hj,
            }
        } else {
            Shape::Ellipse {
                ci,
                cj,
                ri: hi,
                rj: hj,
            }
        };
        shapes.push((shape, level));
    }
    Image::from_fn(rows, cols, |i, j| {
        let (fi, fj) = (i as f64 + 0.5, j as f64 + 0.5);
        shapes
            .iter()
            .rev()
            .find(|(s, _)| s.contains(fi, fj))
            .map_or(10.0, |(_, level)| *level)
    })
}
