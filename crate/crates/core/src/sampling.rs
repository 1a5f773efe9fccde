//! Seeded, thread-count independent random streams.
//!
//! Work is cut into fixed-size chunks; chunk `i` draws from ChaCha8 stream
//! `i` of the user seed. Reductions over chunks are pure max/min/collect, so
//! the result does not depend on how rayon schedules the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: usize = 2048;

pub type SampleRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `work(rng, chunk_index, chunk_len)` over `total` items split into
/// chunks, returning the per-chunk results in chunk order.
pub fn par_chunks<T, F>(total: usize, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SampleRng, usize, usize) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|i| {
            let len = CHUNK.min(total - i * CHUNK);
            let mut rng = stream_rng(seed, i as u64);
            work(&mut rng, i, len)
        })
        .collect()
}

/// Derives an independent sub-seed for a tagged purpose (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maximum of a non-NaN float sequence, or `None` when empty.
pub fn max_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    values.into_iter().filter(|v| !v.is_nan()).reduce(f64::max)
}
