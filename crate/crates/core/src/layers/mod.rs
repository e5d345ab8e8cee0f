//! Layer specifications, parameter declarations, closed-form parameter
//! counts, and layer forward passes.

mod count;
mod forward;
mod params;
mod shape;
mod spec;

pub use count::layer_param_count;
pub use forward::{
    bidirectional_forward, dense_forward, dropout_forward, embedding_forward, layer_forward,
    lstm_forward, multi_head_attention_forward, multi_head_attention_with_weights, residual_add,
    token_position_embedding_forward, transformer_block_forward, AttentionWeights, BoundParams,
    DenseWeights, LayerInput, LayerOutput, LstmWeights, NormWeights, TransformerWeights,
};
pub use params::{ParamCount, ParamInit, ParamSpec, ParameterBundle, EMBEDDING_INIT_RANGE};
pub use shape::infer;
pub use spec::{InputSource, LayerKind, LayerSpec};

/// Epsilon used by every layer normalization unless configured otherwise.
pub const LAYER_NORM_EPSILON: f64 = 1e-6;
