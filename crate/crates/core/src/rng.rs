//! Seed handling.
//!
//! Every random stream is a ChaCha8 generator seeded from a 64-bit value.
//! Sub-streams (per attempt, per message, per replica) derive their seed
//! from the parent seed and a path of stream labels with SplitMix64:
//! `s <- mix(s ^ mix(label + GOLDEN))` for each label in order. Results are
//! therefore reproducible regardless of how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::real::Real;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of the sub-stream addressed by `path`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(seed), |s, &label| mix(s ^ mix(label.wrapping_add(GOLDEN))))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws an index from an (assumed normalized) probability vector.
pub fn sample_index<T: Real, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the cumulative sum
    probs
        .iter()
        .rposition(|p| *p > T::zero())
        .unwrap_or(probs.len() - 1)
}
