//! Seed derivation. Every sample and every optimizer restart owns a ChaCha8
//! generator seeded from `mix(master, index)`, so results do not depend on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Public, fixed mixing function for per-index seeds:
/// `splitmix64(master ^ splitmix64(index))`.
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn generator(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
