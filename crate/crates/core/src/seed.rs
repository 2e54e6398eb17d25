//! Deterministic seed derivation.
//!
//! Every random stream in a run is a ChaCha8 generator whose seed is mixed
//! from a base seed and a few labels, so results do not depend on platform
//! hashing or iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a string label and integer parts.
pub fn derive(base: u64, label: &str, parts: &[u64]) -> u64 {
    let mut h = splitmix(base ^ fnv1a(label.as_bytes()));
    for &p in parts {
        h = splitmix(h ^ p);
    }
    h
}
