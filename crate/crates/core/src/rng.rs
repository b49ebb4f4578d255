//! Reproducible random streams.
//!
//! Every simulation owns a 64-bit seed. Particle `i` draws from ChaCha
//! stream `i` under that seed, so the numbers a particle sees depend only
//! on (seed, particle, draw index) and never on how work is scheduled.
//! Per-trial seeds are derived from a master seed with a splitmix64 chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream offset for the auxiliary population used as a law surrogate.
pub const SURROGATE_STREAM_BASE: u64 = 1 << 40;
/// Stream used for sampling initial parameter estimates.
pub const PARAMETER_INIT_STREAM: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of indices into a master seed.
///
/// `derive_seed(m, &[cell, trial])` gives the seed of trial `trial` in
/// grid cell `cell`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &idx| splitmix64(acc ^ splitmix64(idx)))
}

/// The RNG for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
