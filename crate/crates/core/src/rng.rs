//! Seeded randomness with per-trial substreams.
//!
//! Every Monte Carlo trial draws from its own ChaCha stream derived from
//! `(seed, trial_index)`, so histograms are identical no matter how trials
//! are partitioned or ordered.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one Monte Carlo trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_add(1));
    rng
}

/// RNG for auxiliary draws (bin placement, synthetic data) that must not
/// collide with trial streams.
pub fn aux_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(tag);
    rng
}
