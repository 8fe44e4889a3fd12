//! Seed derivation for independent, reproducible random streams.
//!
//! Every consumer of randomness owns a [`StreamRng`] seeded from a base seed
//! and a list of tags, so streams for different episodes, agents and purposes
//! never overlap and never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags mixed into derived seeds.
pub mod tag {
    pub const ENV: u64 = 0x454e_5600;
    pub const EPISODE: u64 = 0x4550_4953;
    pub const AGENT: u64 = 0x4147_4e54;
    pub const INIT: u64 = 0x494e_4954;
    pub const EVAL: u64 = 0x4556_414c;
    pub const POLICY: u64 = 0x504f_4c49;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mix a base seed with a sequence of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(base: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, tags))
}
