//! Seeded random streams.
//!
//! Every stochastic component takes an explicit [`SoupRng`]; nothing reads
//! ambient entropy. ChaCha8 keeps streams identical across platforms and its
//! state serializes into world snapshots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SoupRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SoupRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for sub-stream `index` of `base`
/// (SplitMix64 finalizer over the pair).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
