//! Deterministic seed derivation.
//!
//! Every random stream in an experiment is derived from a parent seed and a
//! textual tag, so adding a new stream (or a new acquisition rule) never
//! shifts the values drawn by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all library randomness.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Child seed for the stream named `tag`.
pub fn derive(seed: u64, tag: &str) -> u64 {
    splitmix64(splitmix64(seed) ^ fnv1a(tag))
}

/// Child seed for the `index`-th member of a family of streams.
pub fn derive_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive(seed, tag) ^ splitmix64(index))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
