//! Seed handling.
//!
//! Every stochastic stage takes an explicit `u64` seed. Example-level seeds are
//! split from a master seed with a counter-based ChaCha stream, so example `i`
//! never depends on how many examples were generated before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for a single seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of example `index` under `master`.
pub fn example_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Independent sub-seeds for the stages of one example, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub draw: u64,
    pub rr: u64,
    pub noise: u64,
    pub window: u64,
    pub artefact: u64,
}

impl StageSeeds {
    pub fn split(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StageSeeds {
            draw: rng.next_u64(),
            rr: rng.next_u64(),
            noise: rng.next_u64(),
            window: rng.next_u64(),
            artefact: rng.next_u64(),
        }
    }
}
