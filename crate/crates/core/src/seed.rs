//! Deterministic seed derivation.
//!
//! Every random stream in an experiment is derived from the master seed by
//! mixing in a tag (replicate index, iteration, pool index, ...), so streams
//! are independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `(parent, tag)` into a child seed.
pub fn derive(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ tag.wrapping_mul(GOLDEN).rotate_left(17))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
