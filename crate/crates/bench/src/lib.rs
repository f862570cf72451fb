//! Shared fixtures for the benchmarks.

use exact_core::sampler::{sample_many, SamplerConfig};
use exact_core::MotionProgram;

/// `n` default-config programs starting at `seed`.
pub fn corpus(seed: u64, n: usize) -> Vec<MotionProgram> {
    let config = SamplerConfig::default().with_seed(seed);
    sample_many(&config, n)
        .map(|r| r.expect("default sampler config is feasible").1)
        .collect()
}
