//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and selected by a
//! 64-bit stream index. ChaCha is counter based, so the output for a given
//! `(seed, stream)` pair is the same on every platform and independent of how
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream index for replication `rep` at sample-size position `n_index`.
pub fn replication_index(n_index: usize, rep: usize) -> u64 {
    ((n_index as u64) << 32) | rep as u64
}
