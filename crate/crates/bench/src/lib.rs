//! Benchmark fixtures shared by the criterion targets.

use seqclf_core::{Init, RngStream, Tensor};

/// Uniform in `[-0.1, 0.1]`, deterministic in `seed`.
pub fn random(shape: &[usize], seed: u64) -> Tensor<f32> {
    let init = Init::Uniform {
        low: -0.1,
        high: 0.1,
    };
    Tensor::init(shape, &init, &mut RngStream::new(seed)).expect("benchmark shapes are valid")
}
