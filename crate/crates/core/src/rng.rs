//! Counter-based seed derivation.
//!
//! Every random object is generated from a seed computed as a pure function of
//! `(master_seed, trial, factor)`, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of counters into a 64-bit seed.
pub fn counter_hash(words: &[u64]) -> u64 {
    let mut h = mix64(0x5052_4f44_4c41_4221 ^ words.len() as u64);
    for (i, &w) in words.iter().enumerate() {
        h = mix64(h ^ mix64(w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
    }
    h
}

/// Seed for trial `t` of an experiment.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    counter_hash(&[master, trial])
}

/// Seed for factor `k` of trial `t`.
pub fn factor_seed(master: u64, trial: u64, factor: u64) -> u64 {
    counter_hash(&[master, trial, factor])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
