//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the maps run on the rayon pool;
//! without it they run sequentially. Every helper returns results in index
//! order and every reduction uses [`tree_sum`], so numerical output does not
//! depend on the number of workers.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items handled by one Monte-Carlo block (one RNG stream per block).
pub const MC_BLOCK: usize = 4096;

/// Evaluate `f(i)` for `i in 0..n`, collected in index order.
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
        (0..n).map(f).collect()
    }
}

/// Apply `f` to each chunk of `data` of length `chunk` (last one may be shorter).
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Pairwise (cascade) summation with a fixed split rule.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let mid = n / 2;
            tree_sum(&values[..mid]) + tree_sum(&values[mid..])
        }
    }
}

/// Number of blocks of size `block` needed to cover `n` items.
pub fn block_count(n: usize, block: usize) -> usize {
    n.div_ceil(block)
}

/// Run `f` with at most `threads` workers.
///
/// Results are identical for every thread count; this only changes speed.
/// Without the `parallel` feature `f` simply runs on the calling thread.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
