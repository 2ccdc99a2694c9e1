//! Counter-based seed derivation.
//!
//! Every random stream in training is keyed by a path such as
//! `(stream kind, outer round, inner repeat, tree)` hashed together with the
//! master seed, so any execution order yields the same streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RESAMPLE_STREAM: u64 = 1;
pub const FOREST_STREAM: u64 = 2;
pub const TREE_STREAM: u64 = 3;
pub const HOLDOUT_STREAM: u64 = 4;
pub const SYNTH_STREAM: u64 = 5;
pub const REPORTER_STREAM: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
