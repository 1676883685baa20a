//! Order-preserving fan-out over an index range.

use alloc::vec::Vec;

/// `(0..count).map(f)` with results in index order. With the `parallel`
/// feature the calls run on the current rayon pool.
#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Like [`map_indices`] but stops at the first error in index order.
pub fn try_map_indices<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indices(count, f).into_iter().collect()
}

/// Independent generator for one unit of work. Streams never overlap, so a
/// result depends only on `(seed, stream)` and not on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
