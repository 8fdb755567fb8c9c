//! Counter-keyed random streams.
//!
//! Every random decision draws from a stream derived from the master seed and
//! a tag path such as `(purpose, user, generation, index)`. Streams never
//! depend on evaluation order, so parallel runs reproduce sequential ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Stream = ChaCha8Rng;

/// Purpose tags, the first element of a stream key.
pub mod purpose {
    pub const MUTATE: u64 = 1;
    pub const CROSSOVER_PAIRING: u64 = 2;
    pub const CROSSOVER: u64 = 3;
    pub const BASELINE: u64 = 4;
    pub const SAMPLE_USERS: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const TARGETS: u64 = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec { master_seed }
    }

    pub fn stream(&self, tags: &[u64]) -> Stream {
        derive_stream(self, tags)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream keyed by `(seed, tags)`. `tags` must be non-empty.
pub fn derive_stream(seed: &SeedSpec, tags: &[u64]) -> Stream {
    assert!(!tags.is_empty(), "derive_stream requires at least one tag");
    let mut state = splitmix64(seed.master_seed);
    // length is mixed in so [1] and [1, 0] differ
    state = splitmix64(state ^ tags.len() as u64);
    for &t in tags {
        state = splitmix64(state.rotate_left(17) ^ splitmix64(t));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
