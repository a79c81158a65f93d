//! Deterministic random streams.
//!
//! Every sampled quantity in the crate is produced in fixed-size chunks. Chunk
//! `c` draws from ChaCha stream `c` of the run seed, so the samples do not
//! depend on how many threads execute the chunks. Reductions are done in chunk
//! order after the parallel map, which makes sums bit-stable as well.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::Range;

pub type SimRng = ChaCha8Rng;

/// Number of samples drawn per chunk.
pub const CHUNK: usize = 1024;

/// RNG for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive an independent seed for a named sub-experiment.
pub fn subseed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `f` over `total` items split into [`CHUNK`]-sized ranges, in parallel,
/// returning the per-chunk results in chunk order.
pub fn chunked<T, F>(total: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, Range<usize>) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            f(&mut rng, lo..hi)
        })
        .collect()
}

/// Configure the global worker pool. Only the first call has an effect.
pub fn set_workers(workers: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build_global();
}
