//! Thin switch between rayon and plain iteration.
//!
//! Every helper here produces the same output regardless of the `parallel`
//! feature or the number of worker threads: work is split into independent
//! items whose results are written to fixed positions, and any reduction is
//! done sequentially afterwards.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f(row_index, row)` to every `width`-long row of `data`.
pub fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Runs two closures, potentially concurrently.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    return rayon::join(a, b);
    #[cfg(not(feature = "parallel"))]
    return (a(), b());
}

/// Applies `f` to each of the three channel planes.
pub fn for_each_channel<T, F>(planes: &mut [Vec<T>; 3], f: F)
where
    T: Send,
    F: Fn(usize, &mut Vec<T>) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    planes
        .par_iter_mut()
        .enumerate()
        .for_each(|(c, p)| f(c, p));
    #[cfg(not(feature = "parallel"))]
    planes.iter_mut().enumerate().for_each(|(c, p)| f(c, p));
}
