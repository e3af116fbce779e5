//! Deterministic random substreams.
//!
//! Every stochastic component draws from its own ChaCha stream whose seed is a
//! pure function of the master seed and a small key. Results therefore do not
//! depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of keys into a new seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Stream keyed by `keys` under `seed`.
pub fn substream(seed: u64, keys: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, keys))
}

/// Stream kinds, so that e.g. node 3's sampler stream never collides with
/// replication 3's data stream.
pub mod stream {
    pub const NODE: u64 = 1;
    pub const STRUCTURE: u64 = 2;
    pub const DATA: u64 = 3;
    pub const REPLICATION: u64 = 4;
    pub const CHAIN: u64 = 5;
}
