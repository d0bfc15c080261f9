//! Keyed, stateless randomness.
//!
//! Every random quantity in an instance is a pure function of
//! `(seed, purpose, entity, index)`, so any element's random data can be
//! computed without generating anything else. There is no global stream.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Domain-separation tag for a family of draws (`"rank"`, `"rj"`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Purpose(u64);

impl Purpose {
    pub const fn new(tag: &str) -> Self {
        // FNV-1a over the tag bytes.
        let bytes = tag.as_bytes();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut i = 0;
        while i < bytes.len() {
            h ^= bytes[i] as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
            i += 1;
        }
        Purpose(h)
    }
}

/// Composite key of a single draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DrawKey {
    pub purpose: Purpose,
    pub entity: u64,
    pub index: u64,
}

impl DrawKey {
    pub const fn new(tag: &str, entity: u64) -> Self {
        DrawKey {
            purpose: Purpose::new(tag),
            entity,
            index: 0,
        }
    }

    pub const fn with_purpose(purpose: Purpose, entity: u64, index: u64) -> Self {
        DrawKey {
            purpose,
            entity,
            index,
        }
    }

    pub const fn index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomTape {
    seed: u64,
}

impl RandomTape {
    pub const fn new(seed: u64) -> Self {
        RandomTape { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform 64-bit word for `key`.
    #[inline]
    pub fn word(&self, key: DrawKey) -> u64 {
        let mut h = mix64(self.seed.wrapping_add(GOLDEN));
        h = mix64(h ^ key.purpose.0);
        h = mix64(h ^ key.entity.wrapping_mul(GOLDEN));
        mix64(h ^ key.index.wrapping_add(0x632b_e59b_d9b4_e019))
    }

    /// Uniform integer in `[0, range)`; `range = 0` is rejected.
    pub fn derive_uniform(&self, key: DrawKey, range: u64) -> Result<u64> {
        if range == 0 {
            return Err(invalid("derive_uniform: range must be at least 1"));
        }
        Ok(self.below(key, range))
    }

    /// Like [`derive_uniform`](Self::derive_uniform) for callers that already
    /// guarantee `range >= 1`.
    #[inline]
    pub(crate) fn below(&self, key: DrawKey, range: u64) -> u64 {
        debug_assert!(range > 0);
        // Lemire's multiply-shift with rejection; retries re-mix the word.
        let threshold = range.wrapping_neg() % range;
        let mut x = self.word(key);
        loop {
            let m = (x as u128) * (range as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
            x = mix64(x ^ GOLDEN);
        }
    }
}

/// 64-bit FNV-1a digest, stable across platforms and runs.
pub fn digest(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
