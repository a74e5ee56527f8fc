//! Seeded random substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! SHA-256 digest of `(seed, tag, parts…)`, so results never depend on the
//! order in which instances or keypoints are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// One part of a substream key.
pub enum KeyPart<'a> {
    Int(u64),
    Text(&'a str),
}

impl From<u64> for KeyPart<'_> {
    fn from(v: u64) -> Self {
        KeyPart::Int(v)
    }
}

impl From<usize> for KeyPart<'_> {
    fn from(v: usize) -> Self {
        KeyPart::Int(v as u64)
    }
}

impl<'a> From<&'a str> for KeyPart<'a> {
    fn from(v: &'a str) -> Self {
        KeyPart::Text(v)
    }
}

pub fn substream(seed: u64, tag: &str, parts: &[KeyPart<'_>]) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    for part in parts {
        match part {
            KeyPart::Int(v) => {
                hasher.update([0u8]);
                hasher.update(v.to_le_bytes());
            }
            KeyPart::Text(s) => {
                hasher.update([1u8]);
                hasher.update((s.len() as u64).to_le_bytes());
                hasher.update(s.as_bytes());
            }
        }
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
