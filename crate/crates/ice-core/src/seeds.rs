//! Deterministic seed derivation for parallel work.
//!
//! Every concurrent task (group fit, bootstrap replicate, simulation
//! replicate, experiment cell) owns an RNG derived here from the run seed and
//! its task coordinates, so results never depend on scheduling or thread
//! count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with task coordinates into a new seed.
pub(crate) fn mix(base: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in parts {
        s = splitmix64(s ^ splitmix64(p));
    }
    s
}

/// Project-standard RNG for a derived seed.
pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG for a numbered substream of a seed (e.g. per proportion group).
pub(crate) fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}
