//! Seeded, splittable random streams.
//!
//! Every stochastic operation takes an explicit [`RandomStream`]. Child
//! streams are derived from the parent's key and a label, never from the
//! parent's consumed state, so adding draws to one stream leaves every
//! sibling untouched.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    key: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a, stable across toolchains unlike `DefaultHasher`.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self::with_key(splitmix64(seed))
    }

    fn with_key(key: u64) -> Self {
        Self {
            key,
            rng: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Child stream named `label`.
    pub fn derive(&self, label: &str) -> Self {
        Self::with_key(splitmix64(self.key ^ splitmix64(label_hash(label))))
    }

    /// Child stream named `label` with a numeric index, for per-cell streams
    /// in sweeps and per-thread trial batches.
    pub fn derive_indexed(&self, label: &str, index: u64) -> Self {
        let base = self.derive(label);
        Self::with_key(splitmix64(base.key.wrapping_add(splitmix64(index))))
    }
}

impl RngCore for RandomStream {
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
