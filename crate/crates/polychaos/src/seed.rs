//! Deterministic seed derivation for independent RNG substreams.
//!
//! Every randomized stage of the toolkit owns its RNG through a seed derived
//! from `(master seed, labels...)`, so concurrent execution and worker counts
//! can never perturb results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a fixed, documented mixing function.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of labels into a new substream seed.
pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    let mut s = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    for &l in labels {
        s = splitmix64(s ^ splitmix64(l));
    }
    s
}

/// A seeded RNG for the substream identified by `labels`.
pub fn rng(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, labels))
}

/// Stable label constants for the toolkit's substreams.
pub mod label {
    pub const LHS_DIM: u64 = 0x01;
    pub const FOLDS: u64 = 0x02;
    pub const TRAIN: u64 = 0x03;
    pub const TEST: u64 = 0x04;
    pub const MC_BLOCK: u64 = 0x05;
    pub const REPLICATION: u64 = 0x06;
}
