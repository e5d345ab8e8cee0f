use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::metrics::{correct_count, sparse_cce_loss};
use crate::architectures::{ForwardMode, Model, ModelInputs};
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{Element, Tensor};
use crate::text::{batch_iterator, EncodedCorpus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub validation_split: f64,
    pub shuffle: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch: 128,
            seed: 42,
            validation_split: 0.2,
            shuffle: true,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::Config(format!(
                "validation split {} outside [0, 1)",
                self.validation_split
            )));
        }
        if self.adam.lr.is_nan() || self.adam.lr <= 0.0 || self.adam.decay < 0.0 {
            return Err(Error::Config(
                "learning rate must be positive and decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_accuracy: f64,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
    /// Wall time of the training pass, excluding validation.
    pub wall_ms: f64,
}

fn inputs(data: &EncodedCorpus) -> ModelInputs<'_> {
    ModelInputs {
        chars: data.chars.as_ref(),
        words: data.words.as_ref(),
    }
}

/// Mean loss and accuracy with dropout off.
pub fn evaluate<T: Element>(
    model: &Model<T>,
    data: &EncodedCorpus,
    batch: usize,
) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Dataset("cannot evaluate on an empty set".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0;
    let order: Vec<usize> = (0..data.len()).collect();
    for rows in order.chunks(batch.max(1)) {
        let part = data.subset(rows);
        let probs = model.predict(inputs(&part))?;
        loss += sparse_cce_loss(&probs, &part.labels)? * rows.len() as f64;
        correct += correct_count(&probs, &part.labels)?;
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// One shuffled pass of minibatch updates, then validation.
pub fn train_epoch<T: Element>(
    model: &mut Model<T>,
    train: &EncodedCorpus,
    val: Option<&EncodedCorpus>,
    config: &TrainConfig,
    adam: &mut AdamState<T>,
    rng: &mut RngStream,
    epoch: usize,
) -> Result<EpochMetrics> {
    if train.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let started = Instant::now();
    let batches = batch_iterator(train.len(), config.batch, config.shuffle, rng)?;
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for rows in &batches {
        let part = train.subset(rows);
        let (loss, hits, grads) = batch_gradients(model, &part, rng)?;
        loss_sum += loss * rows.len() as f64;
        correct += hits;
        adam_step(model, &grads, adam)?;
    }
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let (val_loss, val_accuracy) = match val.filter(|v| !v.is_empty()) {
        Some(v) => {
            let (l, a) = evaluate(model, v, config.batch)?;
            (Some(l), Some(a))
        }
        None => (None, None),
    };
    let n = train.len() as f64;
    Ok(EpochMetrics {
        epoch,
        train_accuracy: correct as f64 / n,
        train_loss: loss_sum / n,
        val_accuracy,
        val_loss,
        wall_ms,
    })
}

type BatchResult<T> = (f64, usize, Vec<Option<Tensor<T>>>);

/// Training-mode loss (cross-entropy plus penalties), correct count, and
/// gradients of every trainable parameter.
pub fn batch_gradients<T: Element>(
    model: &Model<T>,
    batch: &EncodedCorpus,
    rng: &mut RngStream,
) -> Result<BatchResult<T>> {
    let graph = Graph::new();
    let bound = model.bind(&graph);
    let out = model.forward(&graph, &bound, inputs(batch), ForwardMode::Train(rng))?;
    let mut loss = out.probs.sparse_cce(&batch.labels)?;
    if let Some(p) = out.penalty {
        loss = loss.add(p)?;
    }
    let hits = correct_count(&out.probs.value(), &batch.labels)?;
    let value = loss.value().data()[0].as_f64();
    let mut grads = graph.backward(loss)?;
    let grads = bound
        .iter()
        .map(|&v| {
            if v.requires_grad() {
                Some(grads.take(v).unwrap_or_else(|| Tensor::zeros(&v.shape())))
            } else {
                None
            }
        })
        .collect();
    Ok((value, hits, grads))
}

/// `config.epochs` epochs from a fresh optimizer; `on_epoch` sees each
/// record as it is produced.
pub fn fit_with<T: Element>(
    model: &mut Model<T>,
    train: &EncodedCorpus,
    val: Option<&EncodedCorpus>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    let mut adam = AdamState::for_model(config.adam, model);
    let mut rng = RngStream::new(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let m = train_epoch(model, train, val, config, &mut adam, &mut rng, epoch)?;
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}

pub fn fit<T: Element>(
    model: &mut Model<T>,
    train: &EncodedCorpus,
    val: Option<&EncodedCorpus>,
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    fit_with(model, train, val, config, |_| {})
}
