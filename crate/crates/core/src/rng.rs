//! Reproducible random streams.
//!
//! Every descent owns a `ChaCha8Rng` seeded from the run's base seed mixed
//! with a structural stream id (first worker, K, restart index). Same inputs,
//! same stream, independent of thread scheduling.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DescentRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a base seed.
pub fn mix_seed(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(base), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Seed for the descent identified by `(first_worker, k, restart)`.
pub fn descent_seed(base: u64, first_worker: usize, k: usize, restart: usize) -> u64 {
    mix_seed(base, &[first_worker as u64, k as u64, restart as u64])
}

pub fn rng_from_seed(seed: u64) -> DescentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Non-reproducible seed: clock nanoseconds times `(rank + 1)`.
pub fn wall_clock_seed(rank: usize) -> u64 {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    nanos.wrapping_mul(rank as u64 + 1)
}
