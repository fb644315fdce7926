//! Deterministic data-parallel helpers.
//!
//! Reductions are split into fixed-size chunks whose partial results are
//! combined in chunk order, so the floating-point result is identical with
//! or without the `parallel` feature and for any thread count.

use std::ops::Range;

pub(crate) const CHUNK: usize = 256;

#[cfg(feature = "parallel")]
const PAR_MIN: usize = 2048;

fn chunk_ranges(n: usize) -> impl Iterator<Item = Range<usize>> {
    (0..n.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(n))
}

/// Sum of `f(range)` over fixed chunks of `0..n`, combined left to right.
pub(crate) fn chunked_sum<T, F>(n: usize, zero: T, f: F) -> T
where
    T: Send + Copy + std::ops::Add<Output = T>,
    F: Fn(Range<usize>) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    if n >= PAR_MIN {
        use rayon::prelude::*;
        let ranges: Vec<_> = chunk_ranges(n).collect();
        let parts: Vec<T> = ranges.into_par_iter().map(&f).collect();
        return parts.into_iter().fold(zero, |a, b| a + b);
    }
    chunk_ranges(n).map(f).fold(zero, |a, b| a + b)
}

/// Apply `f(index, item)` to every element of `out`.
pub(crate) fn for_each_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_MIN {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Map over independent jobs, preserving order.
pub(crate) fn map_jobs<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
