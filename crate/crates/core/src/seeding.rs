//! Deterministic random substreams.
//!
//! Every replicate, trial or scenario draws from its own generator derived
//! from `(seed, key, index)`, so results never depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a hash of a stream key.
pub fn key_hash(key: &str) -> u64 {
    key.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed of substream `index` under `key`.
pub fn substream_seed(seed: u64, key: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(key_hash(key))) ^ splitmix64(index.wrapping_add(1)))
}

/// Generator for substream `index` under `key`.
pub fn substream(seed: u64, key: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, key, index))
}
