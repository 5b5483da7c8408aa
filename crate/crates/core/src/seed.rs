//! Seed derivation.
//!
//! Every random stream in the crate (splits, replicates, forest trees, inner
//! bags) is keyed by `(parent seed, index)` so results never depend on the
//! order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(GOLDEN_GAMMA).rotate_left(17))
}

/// Portable generator for a seed; ChaCha output is fixed across platforms.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-streams so unrelated consumers of one parent seed never collide.
pub(crate) mod stream {
    pub const SPLIT: u64 = 0x0053_504c_4954;
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const FIT: u64 = 0x0046_4954;
    pub const INNER_BAG: u64 = 0x0049_4e4e_4552;
    pub const TREE: u64 = 0x5452_4545;
    pub const FEATURES: u64 = 0x4645_4154;
}
