//! Chain-level parallelism. With the `parallel` feature (default) chains are
//! spread over the rayon pool; without it they run one after another. Results
//! always come back in chain-index order so reductions are deterministic.

use crate::error::Result;

/// Evaluate `f(0..n)` and collect the results in index order.
pub fn map_chains<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_chains_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_chains_sequential(n, f)
    }
}

pub fn map_chains_sequential<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_chains_parallel<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Seed of chain `index` for a run seeded with `base`.
pub fn chain_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}
