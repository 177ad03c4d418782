//! Row-parallel drivers for per-pixel kernels.
//!
//! Every driver returns the per-row results in row order. Callers reduce them
//! sequentially, which keeps sums independent of the thread count and of
//! whether the `parallel` feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

// Rows handed to one rayon task at minimum; keeps task overhead below the
// per-row work for the image sizes we deal with.
#[cfg(feature = "parallel")]
const MIN_ROWS: usize = 4;

pub(crate) fn rows1<R, F>(a: &mut [f64], cols: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut [f64]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(cols)
            .with_min_len(MIN_ROWS)
            .enumerate()
            .map(|(i, ra)| f(i, ra))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks_mut(cols)
            .enumerate()
            .map(|(i, ra)| f(i, ra))
            .collect()
    }
}

pub(crate) fn rows2<R, F>(a: &mut [f64], b: &mut [f64], cols: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut [f64], &mut [f64]) -> R + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(cols)
            .zip(b.par_chunks_mut(cols))
            .with_min_len(MIN_ROWS)
            .enumerate()
            .map(|(i, (ra, rb))| f(i, ra, rb))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks_mut(cols)
            .zip(b.chunks_mut(cols))
            .enumerate()
            .map(|(i, (ra, rb))| f(i, ra, rb))
            .collect()
    }
}

/// Evaluates `f` for every row index without writing any buffer.
pub(crate) fn rows_ro<R, F>(rows: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..rows)
            .into_par_iter()
            .with_min_len(MIN_ROWS)
            .map(f)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..rows).map(f).collect()
    }
}

/// Maps independent work items (whole solves, sweeps) in input order.
pub(crate) fn map_items<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

pub(crate) fn ordered_sum(parts: &[f64]) -> f64 {
    parts.iter().fold(0.0, |acc, x| acc + x)
}
