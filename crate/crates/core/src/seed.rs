//! Deterministic seed derivation.
//!
//! Every random quantity in the crate is drawn from its own ChaCha stream,
//! keyed by a master seed, a stream tag and an index. Streams never share
//! state, so changing how many draws one consumer makes cannot perturb
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags.
pub mod stream {
    pub const SCENARIO: u64 = 0x01;
    pub const SPLIT: u64 = 0x02;
    pub const LOGITS: u64 = 0x03;
    pub const NETWORK: u64 = 0x04;
    pub const BATCH: u64 = 0x05;
    pub const GUMBEL: u64 = 0x06;
    pub const NOISE_TRAIN: u64 = 0x07;
    pub const NOISE_TEST: u64 = 0x08;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index)
}

pub fn rng_for(master: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, tag, index))
}
