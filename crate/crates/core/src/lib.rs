//! Engine for four text-classification networks: a character CNN, a
//! BiLSTM over frozen pretrained word vectors, a two-branch residual
//! CNN-BiLSTM, and a small transformer encoder.
//!
//! Layers run on a define-by-run reverse-mode tape ([`autodiff`]) over
//! dense row-major tensors in f32 or f64. [`architectures`] builds the
//! layer graphs and their parameter counts, [`text`] and [`pipeline`]
//! turn labeled text into id matrices, [`training`] runs Adam, and
//! [`bench`] holds the synthetic corpus, timing tables and check suites.

pub mod architectures;
pub mod autodiff;
pub mod bench;
pub mod config;
pub mod error;
pub mod layers;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod text;
pub mod training;

pub use architectures::{ArchitectureConfig, Model, ModelGraph, ModelKind};
pub use autodiff::{Activation, Gradients, Graph, IdMatrix, Var};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::{Element, Init, Tensor};
