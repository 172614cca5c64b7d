//! Row-parallel evaluation with a sequential fallback.
//!
//! Each output entry is computed by one closure call with a fixed summation
//! order, so results are bitwise identical with or without the `parallel`
//! feature and for any thread count.

use crate::spectral::C64;

#[cfg(feature = "parallel")]
pub(crate) fn map_rows<F>(n: usize, f: F) -> Vec<C64>
where
    F: Fn(usize) -> C64 + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_rows<F>(n: usize, f: F) -> Vec<C64>
where
    F: Fn(usize) -> C64 + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn fill_rows<F>(data: &mut [C64], width: usize, f: F)
where
    F: Fn(usize, &mut [C64]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fill_rows<F>(data: &mut [C64], width: usize, f: F)
where
    F: Fn(usize, &mut [C64]) + Sync + Send,
{
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
}

/// Maps independent jobs (parameter sweeps) in parallel, preserving order.
#[cfg(feature = "parallel")]
pub fn map_jobs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_jobs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
