//! Data-parallel execution helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over the rayon pool;
//! without it they are plain iterator loops. Output order always follows
//! input order, and chunk boundaries depend only on input length, so every
//! caller gets bit-identical results at any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Sentences per gradient/alignment work unit. Fixed so that reduction
/// shape, and therefore float rounding, is independent of thread count.
pub const CHUNK: usize = 32;

/// Maps `f` over `items`, preserving order.
pub fn map_ordered<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
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

/// Sequential twin of [`map_ordered`]; the reference path for benchmarks
/// and determinism tests.
pub fn map_ordered_seq<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    F: Fn(&I) -> O,
{
    items.iter().map(f).collect()
}

/// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
pub fn map_chunks<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&[I]) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(CHUNK).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(CHUNK).map(f).collect()
    }
}

/// Sequential twin of [`map_chunks`].
pub fn map_chunks_seq<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    F: Fn(&[I]) -> O,
{
    items.chunks(CHUNK).map(f).collect()
}

/// Runs `f` with worker parallelism capped at `threads` (0 keeps the
/// default pool). Without the `parallel` feature, `f` simply runs inline.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            f()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("building a rayon pool cannot fail with only num_threads set")
                .install(f)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
