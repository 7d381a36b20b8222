//! Seeded random streams.
//!
//! Every stochastic step uses ChaCha8 seeded through `SeedableRng::seed_from_u64`,
//! so results are reproducible bit for bit by any ChaCha8 implementation that
//! follows the `rand_core` seed expansion (PCG32 expansion of the `u64` seed).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ExperimentRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named sub-task from a base seed.
pub fn substream(seed: u64, stream: u64) -> ExperimentRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
