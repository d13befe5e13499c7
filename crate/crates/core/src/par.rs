//! Execution backends for the crate's data-parallel loops.
//!
//! Every helper here returns results in input order, and reductions over
//! floating point values are done in fixed-size chunks whose partial results
//! are combined sequentially. The output therefore does not depend on the
//! backend or on the number of worker threads.

/// Points per chunk for chunked reductions.
pub const CHUNK: usize = 256;

/// Parallel when the `parallel` feature is on, sequential otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Backend {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Backend::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
        }
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Backend::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
        }
    }

    /// Maps `f` over consecutive `[start, end)` index chunks of `0..n`.
    pub fn map_chunks<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(std::ops::Range<usize>) -> R + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        self.map_range(chunks, |c| {
            let start = c * CHUNK;
            f(start..(start + CHUNK).min(n))
        })
    }

    /// Number of indices in `0..n` for which `pred` holds.
    pub fn count<F>(self, n: usize, pred: F) -> usize
    where
        F: Fn(usize) -> bool + Sync + Send,
    {
        match self {
            Backend::Sequential => (0..n).filter(|&i| pred(i)).count(),
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().filter(|&i| pred(i)).count()
            }
        }
    }
}
