//! Deterministic random streams.
//!
//! Every stream is a ChaCha12 generator keyed by 32 bytes. Keys are derived
//! with SHA-256 so that streams can be nested to any depth:
//!
//! ```text
//! key(seed)          = SHA-256("feller/seed" || seed_le)
//! key(parent, id)    = SHA-256(parent_key || parent_lane_le || id_le)
//! ```
//!
//! A [`Fork`] draws a fresh 32-byte key from its parent and hands out
//! lanes that share the key but use distinct ChaCha stream numbers. The
//! Euler scheme uses one fork per step to give each mixture component its
//! own lane.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u8; 32],
    lane: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"feller/seed");
        hasher.update(seed.to_le_bytes());
        Self::from_key(hasher.finalize().into(), 0)
    }

    fn from_key(key: [u8; 32], lane: u64) -> Self {
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(lane);
        Self { key, lane, rng }
    }

    /// Independent child stream. Does not advance `self`.
    pub fn substream(&self, id: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update(self.lane.to_le_bytes());
        hasher.update(id.to_le_bytes());
        Self::from_key(hasher.finalize().into(), 0)
    }

    /// Draws a fresh key from this stream for a family of lanes.
    pub fn fork(&mut self) -> Fork {
        let mut key = [0u8; 32];
        self.rng.fill_bytes(&mut key);
        Fork { key }
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        self.rng.sample(Open01)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Fork {
    key: [u8; 32],
}

impl Fork {
    pub fn lane(&self, id: u64) -> RngStream {
        RngStream::from_key(self.key, id)
    }
}
