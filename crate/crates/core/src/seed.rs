//! Deterministic seed derivation.
//!
//! Every random stream in an experiment is keyed by a tuple such as
//! `(master seed, agent index, episode, stream)`, so a run never depends on
//! scheduling order or on how many draws another stream consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the harness.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const PROVIDE: u64 = 3;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}
