//! Seed derivation. Every random stream in the pipeline is keyed by a master
//! seed plus a tuple of tags, so streams never depend on call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_MASK: u64 = 1;
pub const TAG_SPLIT: u64 = 2;
pub const TAG_VAL_SPLIT: u64 = 3;
pub const TAG_SHUFFLE: u64 = 4;
pub const TAG_INIT: u64 = 5;
pub const TAG_PHANTOM: u64 = 6;
pub const TAG_COILS: u64 = 7;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(master), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn rng_for(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
