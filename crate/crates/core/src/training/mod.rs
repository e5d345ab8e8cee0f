//! Loss and accuracy, Adam with inverse-time decay, and the epoch loop.

mod adam;
mod fit;
mod metrics;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::{batch_gradients, evaluate, fit, fit_with, train_epoch, EpochMetrics, TrainConfig};
pub use metrics::{accuracy, argmax, correct_count, sparse_cce_loss};
