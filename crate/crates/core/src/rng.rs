//! Counter-based seed derivation.
//!
//! A root seed plus a key path (model stream, step, run, ...) is mixed into a
//! fresh 64-bit seed with SplitMix64 finalisers. Streams are therefore fixed by
//! their keys alone and never by the order in which tasks happen to run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every random draw in the crate.
pub type SimRng = ChaCha8Rng;

/// Key reserved for the initial-state draw of a particle stream.
pub const INIT_KEY: u64 = u64::MAX;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(root);
    for &key in path {
        h = splitmix64(h ^ splitmix64(key.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(root: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(root, path))
}
