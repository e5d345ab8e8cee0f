//! The four classification networks: builders, runtime, reports, and
//! reference parameter counts.

mod builders;
mod graph;
mod model;
mod reference;
mod report;

pub use builders::{
    build_char_cnn, build_glove_bilstm, build_res_cnn_bilstm, build_transformer,
    ArchitectureConfig, CharCnnConfig, CharStackConfig, GloveConfig, ModelKind, ResConfig,
    TransformerConfig, WordEmbeddingConfig, CHAR_BRANCH, NUM_CLASSES, WORD_BRANCH,
};
pub use graph::{ModelGraph, ModelNode, NodeId};
pub use model::{ForwardMode, Model, ModelInputs, ModelOutput};
pub use reference::{verify_reference_counts, CountCheck, ReferenceCounts, VerificationReport};
pub use report::{describe_model, group_thousands, LayerReport, LayerRow};
