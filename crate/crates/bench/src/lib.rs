//! Fixtures shared by the benchmarks.

use specsbm::sbm::{sample_sbm_batch, SbmParams};
use specsbm::Graph;

/// Two-block corpus at the scale used in the recoverability experiment.
pub fn two_block_corpus(n: usize, count: usize, seed: u64) -> Vec<Graph> {
    let omega = 10.0 / (n as f64).sqrt();
    let params = SbmParams::new(omega, vec![0.5, 0.5], vec![0.85, 0.575], 0.05 * 0.575)
        .expect("valid fixture parameters");
    sample_sbm_batch(&params, n, count, seed).expect("sampling fixture")
}
