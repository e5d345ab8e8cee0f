//! Shape inference and parameter declaration per layer kind.
//!
//! Shapes here are per example; the batch axis is implicit.

use super::params::{ParamInit, ParamSpec, ParameterBundle, EMBEDDING_INIT_RANGE};
use super::spec::{LayerKind, LayerSpec};
use crate::error::{Error, Result};

fn sequence(spec: &LayerSpec, shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [t, c] => Ok((t, c)),
        _ => Err(Error::Build(format!(
            "{spec} expects a [time, features] input, got {shape:?}"
        ))),
    }
}

fn ids(spec: &LayerSpec, shape: &[usize]) -> Result<usize> {
    match *shape {
        [t] => Ok(t),
        _ => Err(Error::Build(format!(
            "{spec} expects a token-id sequence, got {shape:?}"
        ))),
    }
}

fn last(shape: &[usize]) -> usize {
    *shape.last().unwrap_or(&0)
}

fn pooled_length(spec: &LayerSpec, time: usize, window: usize, stride: usize) -> Result<usize> {
    if time < window {
        return Err(Error::Build(format!(
            "{spec}: {time} steps cannot fill a window of {window}"
        )));
    }
    Ok((time - window) / stride + 1)
}

pub(crate) fn dense_params(bundle: &mut ParameterBundle, prefix: &str, input: usize, units: usize) {
    bundle.push(ParamSpec::new(
        format!("{prefix}kernel"),
        vec![input, units],
        ParamInit::GlorotUniform,
    ));
    bundle.push(ParamSpec::new(
        format!("{prefix}bias"),
        vec![units],
        ParamInit::Zeros,
    ));
}

pub(crate) fn lstm_params(bundle: &mut ParameterBundle, prefix: &str, input: usize, units: usize) {
    bundle.push(ParamSpec::new(
        format!("{prefix}kernel"),
        vec![input, 4 * units],
        ParamInit::GlorotUniform,
    ));
    bundle.push(ParamSpec::new(
        format!("{prefix}recurrent_kernel"),
        vec![units, 4 * units],
        ParamInit::GlorotUniform,
    ));
    bundle.push(ParamSpec::new(
        format!("{prefix}bias"),
        vec![4 * units],
        ParamInit::ForgetGateBias { units },
    ));
}

pub(crate) fn norm_params(bundle: &mut ParameterBundle, prefix: &str, width: usize) {
    bundle.push(ParamSpec::new(
        format!("{prefix}gain"),
        vec![width],
        ParamInit::Ones,
    ));
    bundle.push(ParamSpec::new(
        format!("{prefix}bias"),
        vec![width],
        ParamInit::Zeros,
    ));
}

pub(crate) fn attention_params(
    bundle: &mut ParameterBundle,
    prefix: &str,
    width: usize,
    heads: usize,
    key_width: usize,
) {
    let packed = heads * key_width;
    for proj in ["query", "key", "value"] {
        dense_params(bundle, &format!("{prefix}{proj}/"), width, packed);
    }
    dense_params(bundle, &format!("{prefix}output/"), packed, width);
}

/// Output shape and declared parameters of `spec` applied to `inputs`.
pub fn infer(spec: &LayerSpec, inputs: &[&[usize]]) -> Result<(Vec<usize>, ParameterBundle)> {
    spec.kind.validate()?;
    if inputs.len() != spec.kind.arity() {
        return Err(Error::Build(format!(
            "{spec} takes {} inputs, {} given",
            spec.kind.arity(),
            inputs.len()
        )));
    }
    let mut bundle = ParameterBundle::default();
    let shape = match spec.kind {
        LayerKind::Input { length, .. } => vec![length],
        LayerKind::Embedding {
            vocab,
            dim,
            trainable,
        } => {
            let t = ids(spec, inputs[0])?;
            let table = ParamSpec::new(
                "embeddings",
                vec![vocab, dim],
                ParamInit::Uniform {
                    range: EMBEDDING_INIT_RANGE,
                },
            );
            bundle.push(if trainable { table } else { table.frozen() });
            vec![t, dim]
        }
        LayerKind::TokenPositionEmbedding { vocab, maxlen, dim } => {
            let t = ids(spec, inputs[0])?;
            if t > maxlen {
                return Err(Error::Length {
                    len: t,
                    max: maxlen,
                });
            }
            let init = ParamInit::Uniform {
                range: EMBEDDING_INIT_RANGE,
            };
            bundle.push(ParamSpec::new(
                "token_embeddings",
                vec![vocab, dim],
                init.clone(),
            ));
            bundle.push(ParamSpec::new(
                "position_embeddings",
                vec![maxlen, dim],
                init,
            ));
            vec![t, dim]
        }
        LayerKind::Conv1d {
            filters,
            kernel,
            stride,
            ..
        } => {
            let (t, c) = sequence(spec, inputs[0])?;
            let t_out = pooled_length(spec, t, kernel, stride)?;
            bundle.push(ParamSpec::new(
                "kernel",
                vec![kernel, c, filters],
                ParamInit::GlorotUniform,
            ));
            bundle.push(ParamSpec::new("bias", vec![filters], ParamInit::Zeros));
            vec![t_out, filters]
        }
        LayerKind::MaxPool1d { window, stride } => {
            let (t, c) = sequence(spec, inputs[0])?;
            vec![pooled_length(spec, t, window, stride)?, c]
        }
        LayerKind::Flatten => vec![inputs[0].iter().product()],
        LayerKind::Dense { units, .. } => {
            let mut shape = inputs[0].to_vec();
            dense_params(&mut bundle, "", last(&shape), units);
            *shape.last_mut().unwrap() = units;
            shape
        }
        LayerKind::Dropout { .. } => inputs[0].to_vec(),
        LayerKind::Lstm {
            units,
            return_sequences,
        } => {
            let (t, c) = sequence(spec, inputs[0])?;
            lstm_params(&mut bundle, "", c, units);
            if return_sequences {
                vec![t, units]
            } else {
                vec![units]
            }
        }
        LayerKind::Bidirectional {
            units,
            return_sequences,
        } => {
            let (t, c) = sequence(spec, inputs[0])?;
            lstm_params(&mut bundle, "forward/", c, units);
            lstm_params(&mut bundle, "backward/", c, units);
            if return_sequences {
                vec![t, 2 * units]
            } else {
                vec![2 * units]
            }
        }
        LayerKind::ResidualAdd => {
            if inputs[0] != inputs[1] {
                return Err(Error::Build(format!(
                    "{spec}: cannot add {:?} and {:?}",
                    inputs[0], inputs[1]
                )));
            }
            inputs[0].to_vec()
        }
        LayerKind::Concat => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.len() != b.len() || a[..a.len() - 1] != b[..b.len() - 1] {
                return Err(Error::Build(format!(
                    "{spec}: cannot concatenate {a:?} and {b:?}"
                )));
            }
            if last(a) != last(b) {
                return Err(Error::Build(format!(
                    "{spec}: branch output widths differ ({} vs {})",
                    last(a),
                    last(b)
                )));
            }
            let mut shape = a.to_vec();
            *shape.last_mut().unwrap() += last(b);
            shape
        }
        LayerKind::GlobalAvgPool => {
            let (_, c) = sequence(spec, inputs[0])?;
            vec![c]
        }
        LayerKind::LayerNorm { .. } => {
            norm_params(&mut bundle, "", last(inputs[0]));
            inputs[0].to_vec()
        }
        LayerKind::MultiHeadAttention { heads, key_width } => {
            let (_, d) = sequence(spec, inputs[0])?;
            attention_params(&mut bundle, "", d, heads, key_width);
            inputs[0].to_vec()
        }
        LayerKind::TransformerBlock {
            heads,
            key_width,
            ff_width,
            ..
        } => {
            let (_, d) = sequence(spec, inputs[0])?;
            attention_params(&mut bundle, "attention/", d, heads, key_width);
            dense_params(&mut bundle, "ffn_1/", d, ff_width);
            dense_params(&mut bundle, "ffn_2/", ff_width, d);
            norm_params(&mut bundle, "norm_1/", d);
            norm_params(&mut bundle, "norm_2/", d);
            inputs[0].to_vec()
        }
    };
    Ok((shape, bundle))
}
