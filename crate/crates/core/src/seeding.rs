//! Named random streams.
//!
//! Every consumer of randomness derives its own generator from a tuple of
//! integers (coordinates plus a purpose tag), so results never depend on the
//! order in which streams are created or consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Purpose tags for stream derivation.
pub mod tag {
    pub const OPTIMUM: u64 = 0x6f70_7431;
    pub const ROTATION: u64 = 0x726f_7431;
    pub const PEAKS: u64 = 0x7065_616b;
    pub const TRIAL: u64 = 0x7472_6961;
    pub const MEMBER: u64 = 0x6d65_6d62;
    pub const SELECTION: u64 = 0x7365_6c65;
    pub const OPTIMIZER: u64 = 0x6f70_7469;
    pub const HOPPING: u64 = 0x686f_7070;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes an ordered tuple of integers into a single 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3_u64 ^ parts.len() as u64;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// Builds a generator for the stream identified by `parts`.
pub fn stream(parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(parts))
}
