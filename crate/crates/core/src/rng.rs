//! Seeded random streams.
//!
//! Every Monte-Carlo task draws from its own ChaCha stream derived from a
//! `(seed, a, b)` triple, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with two task coordinates into a 64-bit stream key.
pub fn derive_key(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ b)
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream for task `(a, b)` under `seed`.
pub fn stream(seed: u64, a: u64, b: u64) -> SimRng {
    SimRng::seed_from_u64(derive_key(seed, a, b))
}
