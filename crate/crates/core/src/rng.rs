//! Seed derivation and the shared edge-success oracle.
//!
//! All randomness is derived from a master seed by a counter-based split:
//! a child seed is a pure function of the parent seed and a list of tags, so
//! adding or removing a consumer never shifts anyone else's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `parent` and a sequence of integer tags.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(parent), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// FNV-1a, used to turn labels (policy names, method names) into tags.
pub fn label_tag(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Stateless success draws for stochastic rewards.
///
/// Whether offering arrival `round` to `patient` succeeds is a fixed function
/// of the run seed, so every policy and the hindsight oracle see the same
/// realized edge presences without consuming policy randomness.
#[derive(Debug, Clone, Copy)]
pub struct SuccessOracle {
    seed: u64,
}

impl SuccessOracle {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn succeeds(&self, round: u32, patient: usize, prob: f64) -> bool {
        if prob >= 1.0 {
            return true;
        }
        if prob <= 0.0 {
            return false;
        }
        let h = derive_seed(self.seed, &[u64::from(round), patient as u64]);
        // 53 high bits -> uniform in [0, 1)
        let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u < prob
    }
}
