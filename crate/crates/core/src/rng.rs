//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator whose seed is a SplitMix64 hash of a
//! base seed and a tuple of tags (chain id, cell index, ...), so the same
//! tags always reproduce the same draws regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x51_7CC1_B727_220A)));
    }
    h
}

pub fn substream(seed: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(mix(seed, tags))
}

/// Uniform in `[0, 1)` as a pure function of `(seed, tags)`.
pub fn counter_uniform(seed: u64, tags: &[u64]) -> f64 {
    (mix(seed, tags) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn cell_stream(seed: u64, k: i64, l: i64) -> Rng {
    substream(seed, &[0xCE11, k as u64, l as u64])
}
