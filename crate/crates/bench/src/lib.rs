//! Shared fixtures for the criterion benchmarks.

use morphkit::synthgen::{generate_population, SynthConfig};
use morphkit::EmbeddingRecord;

pub fn population(n_subjects: usize, dim: usize, seed: u64) -> Vec<EmbeddingRecord> {
    let config = SynthConfig { n_subjects, dim, seed, ..SynthConfig::default() };
    generate_population(&config).expect("valid synthetic config")
}
