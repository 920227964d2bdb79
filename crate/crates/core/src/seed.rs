//! Stable seed derivation.
//!
//! Child seeds are digests of a coordinate tuple, so they do not depend on
//! execution order, platform, or on which other scenarios exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic generator used everywhere randomness is needed.
pub type SimRng = ChaCha8Rng;

/// One component of a seed coordinate.
#[derive(Debug, Clone, Copy)]
pub enum Coord<'a> {
    Int(u64),
    Str(&'a str),
}

impl From<u64> for Coord<'_> {
    fn from(v: u64) -> Self {
        Coord::Int(v)
    }
}

impl From<usize> for Coord<'_> {
    fn from(v: usize) -> Self {
        Coord::Int(v as u64)
    }
}

impl<'a> From<&'a str> for Coord<'a> {
    fn from(v: &'a str) -> Self {
        Coord::Str(v)
    }
}

/// Hashes a coordinate tuple into a 64-bit seed.
///
/// Each component is tagged and length-prefixed, so `("ab", "c")` and
/// `("a", "bc")` never collide structurally.
pub fn derive_seed(coords: &[Coord<'_>]) -> u64 {
    let mut h = Sha256::new();
    for c in coords {
        match c {
            Coord::Int(v) => {
                h.update([0u8]);
                h.update(v.to_le_bytes());
            }
            Coord::Str(s) => {
                h.update([1u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Shorthand for `derive_seed` with heterogeneous coordinates.
#[macro_export]
macro_rules! seed_of {
    ($($c:expr),+ $(,)?) => {
        $crate::seed::derive_seed(&[$($crate::seed::Coord::from($c)),+])
    };
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
