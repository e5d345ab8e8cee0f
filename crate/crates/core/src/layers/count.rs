use super::params::ParamCount;
use super::spec::{LayerKind, LayerSpec};
use crate::error::{Error, Result};

/// Closed-form parameter count of a layer applied to a per-example input
/// shape. Independent of the parameter declarations in `shape.rs`; the two
/// are cross-checked by tests.
pub fn layer_param_count(spec: &LayerSpec, input_shape: &[usize]) -> Result<ParamCount> {
    spec.kind.validate()?;
    let width = || -> Result<u64> {
        input_shape
            .last()
            .map(|&w| w as u64)
            .ok_or_else(|| Error::Build(format!("{spec}: empty input shape")))
    };
    let lstm = |input: u64, units: u64| 4 * ((input + units) * units + units);
    let attention = |d: u64, heads: u64, key_width: u64| {
        let packed = heads * key_width;
        3 * (d * packed + packed) + packed * d + d
    };
    let trainable = |n: u64| ParamCount::of(n, true);
    Ok(match spec.kind {
        LayerKind::Embedding {
            vocab,
            dim,
            trainable,
        } => ParamCount::of((vocab * dim) as u64, trainable),
        LayerKind::TokenPositionEmbedding { vocab, maxlen, dim } => {
            trainable(((vocab + maxlen) * dim) as u64)
        }
        LayerKind::Conv1d {
            filters, kernel, ..
        } => {
            let (k, f) = (kernel as u64, filters as u64);
            trainable(k * width()? * f + f)
        }
        LayerKind::Dense { units, .. } => {
            let u = units as u64;
            trainable(width()? * u + u)
        }
        LayerKind::Lstm { units, .. } => trainable(lstm(width()?, units as u64)),
        LayerKind::Bidirectional { units, .. } => trainable(2 * lstm(width()?, units as u64)),
        LayerKind::LayerNorm { .. } => trainable(2 * width()?),
        LayerKind::MultiHeadAttention { heads, key_width } => {
            trainable(attention(width()?, heads as u64, key_width as u64))
        }
        LayerKind::TransformerBlock {
            heads,
            key_width,
            ff_width,
            ..
        } => {
            let d = width()?;
            let ff = ff_width as u64;
            trainable(
                attention(d, heads as u64, key_width as u64)
                    + (d * ff + ff)
                    + (ff * d + d)
                    + 2 * (2 * d),
            )
        }
        LayerKind::Input { .. }
        | LayerKind::MaxPool1d { .. }
        | LayerKind::Flatten
        | LayerKind::Dropout { .. }
        | LayerKind::ResidualAdd
        | LayerKind::Concat
        | LayerKind::GlobalAvgPool => ParamCount::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;

    fn count(kind: LayerKind, input: &[usize]) -> u64 {
        layer_param_count(&LayerSpec::new("l", kind), input)
            .unwrap()
            .total
    }

    fn conv(filters: usize, kernel: usize) -> LayerKind {
        LayerKind::Conv1d {
            filters,
            kernel,
            stride: 1,
            activation: Some(Activation::Relu),
        }
    }

    fn dense(units: usize) -> LayerKind {
        LayerKind::Dense {
            units,
            activation: Some(Activation::Relu),
            l2: None,
        }
    }

    fn bilstm(units: usize) -> LayerKind {
        LayerKind::Bidirectional {
            units,
            return_sequences: true,
        }
    }

    #[test]
    fn conv_counts() {
        assert_eq!(count(conv(256, 7), &[1014, 69]), 123_904);
        assert_eq!(count(conv(256, 7), &[336, 256]), 459_008);
        assert_eq!(count(conv(256, 3), &[110, 256]), 196_864);
    }

    #[test]
    fn embedding_counts() {
        let char_embedding = LayerKind::Embedding {
            vocab: 70,
            dim: 69,
            trainable: true,
        };
        assert_eq!(count(char_embedding, &[1014]), 4_830);
        let glove = layer_param_count(
            &LayerSpec::new(
                "glove",
                LayerKind::Embedding {
                    vocab: 28_870,
                    dim: 100,
                    trainable: false,
                },
            ),
            &[100],
        )
        .unwrap();
        assert_eq!(glove.total, 2_887_000);
        assert_eq!(glove.non_trainable, 2_887_000);
        assert_eq!(glove.trainable, 0);
        let tokpos = LayerKind::TokenPositionEmbedding {
            vocab: 20_000,
            maxlen: 100,
            dim: 32,
        };
        assert_eq!(count(tokpos, &[100]), 643_200);
    }

    #[test]
    fn dense_counts() {
        assert_eq!(count(dense(1024), &[8704]), 8_913_920);
        assert_eq!(count(dense(1024), &[1024]), 1_049_600);
        assert_eq!(count(dense(32), &[1024]), 32_800);
        assert_eq!(count(dense(5), &[32]), 165);
        assert_eq!(count(dense(20), &[32]), 660);
        assert_eq!(count(dense(20), &[20]), 420);
        assert_eq!(count(dense(5), &[20]), 105);
    }

    #[test]
    fn lstm_counts() {
        let single = LayerKind::Lstm {
            units: 512,
            return_sequences: false,
        };
        assert_eq!(count(single, &[100, 100]), 1_255_424);
        assert_eq!(count(bilstm(512), &[100, 100]), 2_510_848);
        assert_eq!(count(bilstm(512), &[34, 256]), 3_149_824);
        assert_eq!(count(bilstm(512), &[34, 1024]), 6_295_552);
        assert_eq!(count(bilstm(64), &[34, 1024]), 557_568);
    }

    #[test]
    fn attention_and_block_counts() {
        let mha = LayerKind::MultiHeadAttention {
            heads: 2,
            key_width: 32,
        };
        assert_eq!(count(mha, &[100, 32]), 8_416);
        let block = LayerKind::TransformerBlock {
            heads: 2,
            key_width: 32,
            ff_width: 32,
            dropout: 0.1,
            epsilon: 1e-6,
        };
        assert_eq!(count(block, &[100, 32]), 10_656);
    }

    #[test]
    fn parameter_free_kinds() {
        for kind in [
            LayerKind::MaxPool1d {
                window: 3,
                stride: 3,
            },
            LayerKind::Flatten,
            LayerKind::Dropout { rate: 0.5 },
            LayerKind::ResidualAdd,
            LayerKind::Concat,
            LayerKind::GlobalAvgPool,
        ] {
            assert_eq!(count(kind, &[10, 4]), 0);
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let bad = LayerSpec::new("d", LayerKind::Dropout { rate: 1.5 });
        assert!(layer_param_count(&bad, &[4]).is_err());
    }
}
