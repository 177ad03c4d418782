//! Dense 2D fields on an `N × M` grid with unit spacing.
//!
//! Index `i` runs over the `N` rows and `j` over the `M` columns; storage is
//! row-major. The x-component of a gradient differences along `i`, the
//! y-component along `j`.

use crate::error::{domain, Error, Result};
use crate::par;

/// A real-valued scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// A pair of scalar fields sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    rows: usize,
    cols: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidImage(format!(
            "grid must be at least 1x1, got {rows}x{cols}"
        )));
    }
    Ok(())
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "{} values for a {rows}x{cols} grid",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite value at ({}, {})",
                k / cols,
                k % cols
            )));
        }
        Ok(Image { rows, cols, data })
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidImage("ragged rows".into()));
        }
        Image::new(rows.len(), cols, rows.concat())
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        Image {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Image::filled(rows, cols, 0.0)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Image { rows, cols, data }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Image { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                found: other,
            });
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm over all pixels.
    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `‖self − other‖₂`.
    pub fn distance(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl VectorField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        VectorField {
            rows,
            cols,
            x: vec![0.0; rows * cols],
            y: vec![0.0; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols)?;
        if x.len() != rows * cols || y.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "component lengths {} and {} for a {rows}x{cols} grid",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite vector component".into()));
        }
        Ok(VectorField { rows, cols, x, y })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Per-pixel Euclidean magnitude.
    pub fn magnitude(&self) -> Image {
        Image::from_raw(
            self.rows,
            self.cols,
            self.x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| (a * a + b * b).sqrt())
                .collect(),
        )
    }

    pub fn dot(&self, other: &VectorField) -> f64 {
        let dx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let dy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        dx + dy
    }
}

/// Forward-difference gradient with zero flux on the last row and column.
pub fn gradient(u: &Image) -> VectorField {
    let (n, m) = u.shape();
    let mut out = VectorField::zeros(n, m);
    let src = u.as_slice();
    par::rows2(&mut out.x, &mut out.y, m, |i, gx, gy| {
        gradient_row(src, n, m, i, gx, gy);
    });
    out
}

#[inline]
pub(crate) fn gradient_row(
    u: &[f64],
    n: usize,
    m: usize,
    i: usize,
    gx: &mut [f64],
    gy: &mut [f64],
) {
    let row = &u[i * m..(i + 1) * m];
    if i + 1 < n {
        let next = &u[(i + 1) * m..(i + 2) * m];
        for j in 0..m {
            gx[j] = next[j] - row[j];
        }
    } else {
        gx.fill(0.0);
    }
    for j in 0..m - 1 {
        gy[j] = row[j + 1] - row[j];
    }
    gy[m - 1] = 0.0;
}

/// Backward-difference divergence, the negative adjoint of [`gradient`].
pub fn divergence(v: &VectorField) -> Image {
    let (n, m) = v.shape();
    let mut out = vec![0.0; n * m];
    par::rows1(&mut out, m, |i, row| {
        for (j, o) in row.iter_mut().enumerate() {
            *o = divergence_at(&v.x, &v.y, n, m, i, j);
        }
    });
    Image::from_raw(n, m, out)
}

#[inline]
pub(crate) fn divergence_at(px: &[f64], py: &[f64], n: usize, m: usize, i: usize, j: usize) -> f64 {
    let k = i * m + j;
    let mut d = 0.0;
    if i + 1 < n {
        d += px[k];
    }
    if i > 0 {
        d -= px[k - m];
    }
    if j + 1 < m {
        d += py[k];
    }
    if j > 0 {
        d -= py[k - 1];
    }
    d
}

/// `Σ |v_ij|^q` with `|·|` the per-pixel Euclidean magnitude.
///
/// With `q = 1` and `v = ∇u` this is the isotropic total variation of `u`.
pub fn field_pnorm(v: &VectorField, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(domain(format!("field norm exponent must be >= 1, got {q}")));
    }
    let (n, m) = v.shape();
    let parts = par::rows_ro(n, |i| {
        let mut acc = 0.0;
        for k in i * m..(i + 1) * m {
            acc += pow_magnitude((v.x[k] * v.x[k] + v.y[k] * v.y[k]).sqrt(), q);
        }
        acc
    });
    Ok(par::ordered_sum(&parts))
}

#[inline]
pub(crate) fn pow_magnitude(mag: f64, q: f64) -> f64 {
    if q == 1.0 {
        mag
    } else if mag == 0.0 {
        0.0
    } else {
        mag.powf(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Image {
        Image::from_fn(n, m, |_, _| rng.random_range(-10.0..10.0))
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize, m: usize) -> VectorField {
        let x = (0..n * m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = (0..n * m).map(|_| rng.random_range(-3.0..3.0)).collect();
        VectorField::new(n, m, x, y).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = gradient(&Image::filled(5, 7, 3.25));
        assert!(g.x.iter().chain(&g.y).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_two_by_two() {
        let u = Image::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let g = gradient(&u);
        assert_eq!(g.x, vec![2.0, 2.0, 0.0, 0.0]);
        assert_eq!(g.y, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn gradient_magnitude_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_image(&mut rng, 8, 8);
        let mag = gradient(&u).magnitude();
        for i in 0..8 {
            for j in 0..8 {
                let dx = if i < 7 {
                    u.get(i + 1, j) - u.get(i, j)
                } else {
                    0.0
                };
                let dy = if j < 7 {
                    u.get(i, j + 1) - u.get(i, j)
                } else {
                    0.0
                };
                let expected = (dx * dx + dy * dy).sqrt();
                assert!((mag.get(i, j) - expected).abs() <= 1e-15 * expected);
            }
        }
    }

    #[test]
    fn divergence_of_zero_and_sum() {
        let d = divergence(&VectorField::zeros(4, 3));
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_field(&mut rng, 16, 16);
        let scale: f64 = v.x.iter().chain(&v.y).map(|a| a.abs()).sum();
        assert!(divergence(&v).sum().abs() <= 1e-14 * scale);
    }

    #[test]
    fn adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, m) in &[(1, 1), (1, 7), (7, 1), (8, 8), (31, 17)] {
            for _ in 0..20 {
                let u = random_image(&mut rng, n, m);
                let v = random_field(&mut rng, n, m);
                let lhs = gradient(&u).dot(&v);
                let rhs = u.dot(&divergence(&v));
                assert!((lhs + rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{n}x{m}");
            }
        }
    }

    #[test]
    fn operator_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let u = random_image(&mut rng, 12, 9);
            let g = gradient(&u);
            assert!(g.dot(&g) <= 8.0 * u.dot(&u));
        }
        // checkerboard nearly attains the bound
        let u = Image::from_fn(32, 32, |i, j| if (i + j) % 2 == 0 { 1.0 } else { -1.0 });
        let g = gradient(&u);
        assert!(g.dot(&g) <= 8.0 * u.dot(&u));
        assert!(g.dot(&g) > 7.0 * u.dot(&u));
    }

    #[test]
    fn pnorm_values() {
        let z = VectorField::zeros(3, 3);
        assert_eq!(field_pnorm(&z, 1.3).unwrap(), 0.0);
        let v = VectorField::new(1, 1, vec![3.0], vec![4.0]).unwrap();
        assert_eq!(field_pnorm(&v, 1.0).unwrap(), 5.0);
        assert!(field_pnorm(&v, 0.5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_field(&mut rng, 8, 8);
        let mut oracle = 0.0;
        for k in 0..64 {
            oracle += (v.x[k] * v.x[k] + v.y[k] * v.y[k]).sqrt().powf(1.5);
        }
        let got = field_pnorm(&v, 1.5).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Image::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Image::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
