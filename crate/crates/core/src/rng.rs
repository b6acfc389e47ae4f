//! Seeding.
//!
//! Every random decision in this crate draws from a [`ChaCha8Rng`] seeded
//! with `seed_from_u64`. ChaCha8 output is specified bit-for-bit and is
//! independent of platform endianness and word size, so a seed reproduces
//! the same results everywhere.
//!
//! Sub-seeds (for a split, a bootstrap, an anneal run) are derived from a
//! parent seed, a text tag and an index with [`derive_seed`]: the tag is
//! hashed with 64-bit FNV-1a and the combination is passed through the
//! SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tag: &str, index: u64) -> u64 {
    let mixed = splitmix64(parent ^ fnv1a(tag.as_bytes()));
    splitmix64(mixed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
