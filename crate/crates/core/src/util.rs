//! Small shared helpers: seeded RNG derivation and hashing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for a (seed, stream...) tuple.
pub fn rng_for(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let mut s = mix64(seed);
    for &k in stream {
        s = mix64(s ^ mix64(k.wrapping_add(0x5bd1_e995)));
    }
    ChaCha8Rng::seed_from_u64(s)
}
