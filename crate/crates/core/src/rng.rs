//! Seeded random streams.
//!
//! Every source of randomness is derived from a user seed plus a stream name,
//! so that e.g. planner restarts and sensor noise never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named sub-streams used throughout the crate.
pub mod stream {
    pub const DATA: u64 = 0x64617461;
    pub const NOISE: u64 = 0x6e6f6973;
    pub const PLANNER: u64 = 0x706c616e;
    pub const TRAIN: u64 = 0x74726169;
    pub const PLAYBACK: u64 = 0x706c6179;
    pub const TASK: u64 = 0x7461736b;
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a seed with a stream id and an index into a new seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(stream)).wrapping_add(index))
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}
