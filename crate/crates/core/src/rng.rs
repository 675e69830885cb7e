//! Seed derivation. Every stochastic stream is keyed by an explicit seed and,
//! for per-sample work, the sample id, so results never depend on visit order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag (sample id, purpose, ...).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, tag: u64) -> Rng {
    rng_from(derive_seed(seed, tag))
}

pub fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

// Domain tags for derived streams.
pub const TAG_INIT: u64 = 0x494e_4954;
pub const TAG_TRAIN: u64 = 0x5452_4149;
pub const TAG_SPLIT: u64 = 0x5350_4c54;
pub const TAG_ATTACK: u64 = 0x4154_544b;
pub const TAG_CLASSIFIER: u64 = 0x434c_4153;
