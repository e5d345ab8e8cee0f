//! Layer forward passes built from the differentiable ops.

use std::rc::Rc;

use super::params::ParameterBundle;
use super::spec::{LayerKind, LayerSpec};
use crate::autodiff::{concat_last, Activation, Graph, IdMatrix, LstmOptions, Var};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct DenseWeights<'g, T: Element> {
    pub kernel: Var<'g, T>,
    pub bias: Var<'g, T>,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmWeights<'g, T: Element> {
    pub kernel: Var<'g, T>,
    pub recurrent: Var<'g, T>,
    pub bias: Var<'g, T>,
}

#[derive(Clone, Copy, Debug)]
pub struct NormWeights<'g, T: Element> {
    pub gain: Var<'g, T>,
    pub bias: Var<'g, T>,
}

#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights<'g, T: Element> {
    pub query: DenseWeights<'g, T>,
    pub key: DenseWeights<'g, T>,
    pub value: DenseWeights<'g, T>,
    pub output: DenseWeights<'g, T>,
}

#[derive(Clone, Copy, Debug)]
pub struct TransformerWeights<'g, T: Element> {
    pub attention: AttentionWeights<'g, T>,
    pub ffn_1: DenseWeights<'g, T>,
    pub ffn_2: DenseWeights<'g, T>,
    pub norm_1: NormWeights<'g, T>,
    pub norm_2: NormWeights<'g, T>,
}

/// A layer's parameter bundle paired with the variables bound to it.
pub struct BoundParams<'a, 'g, T: Element> {
    bundle: &'a ParameterBundle,
    vars: &'a [Var<'g, T>],
}

impl<'a, 'g, T: Element> BoundParams<'a, 'g, T> {
    pub fn new(bundle: &'a ParameterBundle, vars: &'a [Var<'g, T>]) -> Self {
        debug_assert_eq!(bundle.params.len(), vars.len());
        BoundParams { bundle, vars }
    }

    pub fn get(&self, role: &str) -> Result<Var<'g, T>> {
        self.bundle
            .position(role)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Contract(format!("layer has no parameter `{role}`")))
    }

    pub fn dense(&self, prefix: &str) -> Result<DenseWeights<'g, T>> {
        Ok(DenseWeights {
            kernel: self.get(&format!("{prefix}kernel"))?,
            bias: self.get(&format!("{prefix}bias"))?,
        })
    }

    pub fn lstm(&self, prefix: &str) -> Result<LstmWeights<'g, T>> {
        Ok(LstmWeights {
            kernel: self.get(&format!("{prefix}kernel"))?,
            recurrent: self.get(&format!("{prefix}recurrent_kernel"))?,
            bias: self.get(&format!("{prefix}bias"))?,
        })
    }

    pub fn norm(&self, prefix: &str) -> Result<NormWeights<'g, T>> {
        Ok(NormWeights {
            gain: self.get(&format!("{prefix}gain"))?,
            bias: self.get(&format!("{prefix}bias"))?,
        })
    }

    pub fn attention(&self, prefix: &str) -> Result<AttentionWeights<'g, T>> {
        Ok(AttentionWeights {
            query: self.dense(&format!("{prefix}query/"))?,
            key: self.dense(&format!("{prefix}key/"))?,
            value: self.dense(&format!("{prefix}value/"))?,
            output: self.dense(&format!("{prefix}output/"))?,
        })
    }

    pub fn transformer(&self) -> Result<TransformerWeights<'g, T>> {
        Ok(TransformerWeights {
            attention: self.attention("attention/")?,
            ffn_1: self.dense("ffn_1/")?,
            ffn_2: self.dense("ffn_2/")?,
            norm_1: self.norm("norm_1/")?,
            norm_2: self.norm("norm_2/")?,
        })
    }
}

pub fn embedding_forward<'g, T: Element>(
    graph: &'g Graph<T>,
    ids: &IdMatrix,
    table: Var<'g, T>,
) -> Result<Var<'g, T>> {
    graph.embedding(ids, table)
}

/// `token_table[ids[t]] + position_table[t]` for every position.
pub fn token_position_embedding_forward<'g, T: Element>(
    graph: &'g Graph<T>,
    ids: &IdMatrix,
    token_table: Var<'g, T>,
    position_table: Var<'g, T>,
) -> Result<Var<'g, T>> {
    let maxlen = position_table.shape()[0];
    if ids.cols() > maxlen {
        return Err(Error::Length {
            len: ids.cols(),
            max: maxlen,
        });
    }
    graph
        .embedding(ids, token_table)?
        .add_positions(position_table)
}

pub fn dense_forward<'g, T: Element>(
    x: Var<'g, T>,
    weights: &DenseWeights<'g, T>,
    activation: Option<Activation>,
) -> Result<Var<'g, T>> {
    let y = x.matmul(weights.kernel)?.add_bias(weights.bias)?;
    Ok(match activation {
        Some(kind) => y.activation(kind),
        None => y,
    })
}

pub fn lstm_forward<'g, T: Element>(
    x: Var<'g, T>,
    weights: &LstmWeights<'g, T>,
    return_sequences: bool,
) -> Result<Var<'g, T>> {
    x.lstm(
        weights.kernel,
        weights.recurrent,
        weights.bias,
        LstmOptions {
            reverse: false,
            return_sequences,
        },
    )
}

/// Runs one LSTM forward in time and one backward, concatenating
/// `[forward ∥ backward]` on the feature axis. Backward outputs are aligned
/// with the original time positions.
pub fn bidirectional_forward<'g, T: Element>(
    x: Var<'g, T>,
    forward: &LstmWeights<'g, T>,
    backward: &LstmWeights<'g, T>,
    return_sequences: bool,
) -> Result<Var<'g, T>> {
    if forward.recurrent.shape() != backward.recurrent.shape()
        || forward.kernel.shape() != backward.kernel.shape()
    {
        return Err(Error::shape(format!(
            "bidirectional halves differ: {:?} vs {:?}",
            forward.recurrent.shape(),
            backward.recurrent.shape()
        )));
    }
    let fwd = lstm_forward(x, forward, return_sequences)?;
    let bwd = x.lstm(
        backward.kernel,
        backward.recurrent,
        backward.bias,
        LstmOptions {
            reverse: true,
            return_sequences,
        },
    )?;
    concat_last(&[fwd, bwd])
}

/// Multi-head attention; returns the output and the per-head attention
/// weights `[batch, heads, time, time]`.
pub fn multi_head_attention_with_weights<'g, T: Element>(
    query: Var<'g, T>,
    key: Var<'g, T>,
    value: Var<'g, T>,
    weights: &AttentionWeights<'g, T>,
    heads: usize,
) -> Result<(Var<'g, T>, Rc<Tensor<T>>)> {
    let d = *query.shape().last().unwrap_or(&0);
    if weights.query.kernel.shape().first() != Some(&d) || weights.output.bias.shape() != [d] {
        return Err(Error::shape(format!(
            "attention weights do not match model width {d}"
        )));
    }
    let q = dense_forward(query, &weights.query, None)?;
    let k = dense_forward(key, &weights.key, None)?;
    let v = dense_forward(value, &weights.value, None)?;
    let (attended, probs) = q.attention(k, v, heads)?;
    Ok((dense_forward(attended, &weights.output, None)?, probs))
}

pub fn multi_head_attention_forward<'g, T: Element>(
    query: Var<'g, T>,
    key: Var<'g, T>,
    value: Var<'g, T>,
    weights: &AttentionWeights<'g, T>,
    heads: usize,
) -> Result<Var<'g, T>> {
    multi_head_attention_with_weights(query, key, value, weights, heads).map(|(y, _)| y)
}

/// Post-norm encoder block:
/// `a = norm(x + drop(attn(x)))`, `out = norm(a + drop(ffn(a)))`.
#[allow(clippy::too_many_arguments)]
pub fn transformer_block_forward<'g, T: Element>(
    x: Var<'g, T>,
    weights: &TransformerWeights<'g, T>,
    heads: usize,
    dropout_rate: f64,
    epsilon: f64,
    training: bool,
    rng: &mut RngStream,
) -> Result<Var<'g, T>> {
    let attended = multi_head_attention_forward(x, x, x, &weights.attention, heads)?;
    let attended = attended.dropout(dropout_rate, training, rng)?;
    let a = x
        .add(attended)?
        .layer_norm(weights.norm_1.gain, weights.norm_1.bias, epsilon)?;
    let ff = dense_forward(a, &weights.ffn_1, Some(Activation::Relu))?;
    let ff = dense_forward(ff, &weights.ffn_2, None)?;
    let ff = ff.dropout(dropout_rate, training, rng)?;
    a.add(ff)?
        .layer_norm(weights.norm_2.gain, weights.norm_2.bias, epsilon)
}

pub fn dropout_forward<'g, T: Element>(
    x: Var<'g, T>,
    rate: f64,
    training: bool,
    rng: &mut RngStream,
) -> Result<Var<'g, T>> {
    x.dropout(rate, training, rng)
}

pub fn residual_add<'g, T: Element>(a: Var<'g, T>, b: Var<'g, T>) -> Result<Var<'g, T>> {
    a.add(b)
}

/// Input of a layer: raw token ids or an activation.
#[derive(Clone, Copy, Debug)]
pub enum LayerInput<'a, 'g, T: Element> {
    Ids(&'a IdMatrix),
    Dense(Var<'g, T>),
}

/// Output of a layer plus its regularization term, if any.
pub struct LayerOutput<'a, 'g, T: Element> {
    pub value: LayerInput<'a, 'g, T>,
    pub penalty: Option<Var<'g, T>>,
}

/// Runs one layer of any kind on batched inputs. Input layers pass their
/// single input through unchanged.
pub fn layer_forward<'a, 'g, T: Element>(
    graph: &'g Graph<T>,
    spec: &LayerSpec,
    inputs: &[LayerInput<'a, 'g, T>],
    params: &BoundParams<'_, 'g, T>,
    training: bool,
    rng: &mut RngStream,
) -> Result<LayerOutput<'a, 'g, T>> {
    if inputs.len() != spec.kind.arity().max(1) {
        return Err(Error::Contract(format!(
            "{spec} given {} inputs",
            inputs.len()
        )));
    }
    let dense = |k: usize| -> Result<Var<'g, T>> {
        match inputs[k] {
            LayerInput::Dense(v) => Ok(v),
            LayerInput::Ids(_) => Err(Error::Contract(format!("{spec} cannot consume token ids"))),
        }
    };
    let ids = || -> Result<&'a IdMatrix> {
        match inputs[0] {
            LayerInput::Ids(ids) => Ok(ids),
            LayerInput::Dense(_) => Err(Error::Contract(format!("{spec} expects token ids"))),
        }
    };
    let mut penalty = None;
    let y = match spec.kind {
        LayerKind::Input { .. } => {
            return Ok(LayerOutput {
                value: inputs[0],
                penalty: None,
            })
        }
        LayerKind::Embedding { .. } => embedding_forward(graph, ids()?, params.get("embeddings")?)?,
        LayerKind::TokenPositionEmbedding { .. } => token_position_embedding_forward(
            graph,
            ids()?,
            params.get("token_embeddings")?,
            params.get("position_embeddings")?,
        )?,
        LayerKind::Conv1d {
            stride, activation, ..
        } => {
            let y = dense(0)?.conv1d(params.get("kernel")?, params.get("bias")?, stride)?;
            match activation {
                Some(a) => y.activation(a),
                None => y,
            }
        }
        LayerKind::MaxPool1d { window, stride } => dense(0)?.maxpool1d(window, stride)?,
        LayerKind::Flatten => {
            let x = dense(0)?;
            let shape = x.shape();
            let batch = shape.first().copied().unwrap_or(1);
            let width = shape.iter().skip(1).product::<usize>();
            x.reshape(&[batch, width])?
        }
        LayerKind::Dense { activation, l2, .. } => {
            let weights = params.dense("")?;
            let x = dense(0)?;
            let y = dense_forward(x, &weights, activation)?;
            if let Some(coef) = l2.filter(|&c| c > 0.0) {
                let batch = x.shape().first().copied().unwrap_or(1) as f64;
                penalty = Some(
                    y.sum_squares()
                        .scale(coef / batch)
                        .add(weights.bias.sum_squares().scale(coef))?,
                );
            }
            y
        }
        LayerKind::Dropout { rate } => dropout_forward(dense(0)?, rate, training, rng)?,
        LayerKind::Lstm {
            return_sequences, ..
        } => lstm_forward(dense(0)?, &params.lstm("")?, return_sequences)?,
        LayerKind::Bidirectional {
            return_sequences, ..
        } => bidirectional_forward(
            dense(0)?,
            &params.lstm("forward/")?,
            &params.lstm("backward/")?,
            return_sequences,
        )?,
        LayerKind::ResidualAdd => residual_add(dense(0)?, dense(1)?)?,
        LayerKind::Concat => concat_last(&[dense(0)?, dense(1)?])?,
        LayerKind::GlobalAvgPool => dense(0)?.global_avg_pool1d()?,
        LayerKind::LayerNorm { epsilon } => {
            let w = params.norm("")?;
            dense(0)?.layer_norm(w.gain, w.bias, epsilon)?
        }
        LayerKind::MultiHeadAttention { heads, .. } => {
            let x = dense(0)?;
            multi_head_attention_forward(x, x, x, &params.attention("")?, heads)?
        }
        LayerKind::TransformerBlock {
            heads,
            dropout,
            epsilon,
            ..
        } => transformer_block_forward(
            dense(0)?,
            &params.transformer()?,
            heads,
            dropout,
            epsilon,
            training,
            rng,
        )?,
    };
    Ok(LayerOutput {
        value: LayerInput::Dense(y),
        penalty,
    })
}
