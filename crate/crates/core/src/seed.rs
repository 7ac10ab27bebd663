//! Counter-based seed splitting.
//!
//! Every random stream in a run is addressed by a path of integers below a
//! 64-bit master seed, e.g. `[TAG_CAPACITY, path]` or
//! `[TAG_INFO_RATE, ell, TAG_INNER, layer]`. The derivation is:
//!
//! 1. the ChaCha8 key is `ChaCha8Rng::seed_from_u64(master)`;
//! 2. the ChaCha stream id is `fold(0x6a09e667f3bcc909, |h, c| splitmix64(h ^ c))`
//!    over the path components;
//! 3. the word position starts at zero.
//!
//! Streams with different paths never share state, and adding new paths
//! (more chains, more layers, more outer samples) leaves existing streams
//! untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const TAG_CAPACITY: u64 = 1;
pub const TAG_INFO_RATE: u64 = 2;
pub const TAG_MULTILAYER: u64 = 3;
pub const TAG_CHAIN_CHECK: u64 = 4;
pub const TAG_OUTER: u64 = 10;
pub const TAG_NOISE: u64 = 11;
pub const TAG_INNER: u64 = 12;
pub const TAG_BASE: u64 = 13;
pub const TAG_LOG_Z: u64 = 14;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
    path: Vec<u64>,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            path: Vec::new(),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn child(&self, component: u64) -> Self {
        let mut path = self.path.clone();
        path.push(component);
        Self {
            master: self.master,
            path,
        }
    }

    pub fn stream_id(&self) -> u64 {
        self.path
            .iter()
            .fold(0x6a09_e667_f3bc_c909, |h, &c| splitmix64(h ^ c))
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream_id());
        rng
    }
}
