//! Data-parallel execution helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over the current
//! rayon thread pool; without it they run in-order on the calling thread.
//! Both paths produce results in index order, so outputs are identical
//! bit-for-bit either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Evaluates `eval` over `0..n` and keeps the best candidate under `better`.
///
/// `better(a, b)` must implement a strict total order (distinct candidates
/// never compare equal both ways), which makes the parallel reduction
/// order-independent and therefore deterministic.
#[cfg(feature = "parallel")]
pub(crate) fn fold_best<T, F, C>(n: usize, eval: F, better: C) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
    C: Fn(&T, &T) -> bool + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .filter_map(eval)
        .reduce_with(|best, cand| if better(&cand, &best) { cand } else { best })
}

/// Evaluates `eval` over `0..n` and keeps the best candidate under `better`.
#[cfg(not(feature = "parallel"))]
pub(crate) fn fold_best<T, F, C>(n: usize, eval: F, better: C) -> Option<T>
where
    F: Fn(usize) -> Option<T>,
    C: Fn(&T, &T) -> bool,
{
    (0..n).filter_map(eval).fold(None, |acc, cand| match acc {
        None => Some(cand),
        Some(best) => {
            if better(&cand, &best) {
                Some(cand)
            } else {
                Some(best)
            }
        }
    })
}
