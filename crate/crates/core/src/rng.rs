//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! whose seed is a SplitMix64 mix of a master seed and a list of stream ids,
//! so independent streams never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of `(seed, ids...)`. Appending ids yields a new, independent
/// stream; the result never changes across releases.
pub fn derive_seed(seed: u64, ids: &[u64]) -> u64 {
    ids.iter().fold(splitmix64(seed), |acc, &id| {
        splitmix64(acc ^ splitmix64(id))
    })
}

pub fn stream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, ids))
}
