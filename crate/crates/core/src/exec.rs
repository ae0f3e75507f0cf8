//! Data-parallel execution helpers.
//!
//! Hot loops (descriptor sampling, per-edge and per-node network evaluation)
//! are expressed as index maps so they can run on the rayon pool when the
//! `parallel` feature is enabled, or sequentially otherwise. Results are
//! collected in index order, so the output is identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
///
/// Output order always matches index order; reductions over the result must
/// be done sequentially by the caller to keep floating-point sums
/// scheduling-independent.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential variant of [`map_indexed`], available regardless of features.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Dispatches between the parallel and sequential map at runtime.
pub(crate) fn map_indexed_mode<T, F>(parallel: bool, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        map_indexed(n, f)
    } else {
        map_indexed_seq(n, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(1000, |i| (i as f64).sin());
        let b = map_indexed_seq(1000, |i| (i as f64).sin());
        assert_eq!(a, b);
    }
}
