use std::fmt;

use serde::{Deserialize, Serialize};

use crate::autodiff::Activation;
use crate::error::{Error, Result};

/// What an input node carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Chars,
    Words,
}

/// Layer kind with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Input {
        source: InputSource,
        length: usize,
    },
    Embedding {
        vocab: usize,
        dim: usize,
        trainable: bool,
    },
    TokenPositionEmbedding {
        vocab: usize,
        maxlen: usize,
        dim: usize,
    },
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
        activation: Option<Activation>,
    },
    MaxPool1d {
        window: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        units: usize,
        activation: Option<Activation>,
        /// Coefficient of the L2 activity and bias penalties.
        l2: Option<f64>,
    },
    Dropout {
        rate: f64,
    },
    Lstm {
        units: usize,
        return_sequences: bool,
    },
    Bidirectional {
        units: usize,
        return_sequences: bool,
    },
    ResidualAdd,
    Concat,
    GlobalAvgPool,
    LayerNorm {
        epsilon: f64,
    },
    MultiHeadAttention {
        heads: usize,
        key_width: usize,
    },
    TransformerBlock {
        heads: usize,
        key_width: usize,
        ff_width: usize,
        dropout: f64,
        epsilon: f64,
    },
}

impl LayerKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            LayerKind::Input { .. } => "Input",
            LayerKind::Embedding { .. } => "Embedding",
            LayerKind::TokenPositionEmbedding { .. } => "TokenPositionEmbedding",
            LayerKind::Conv1d { .. } => "Conv1D",
            LayerKind::MaxPool1d { .. } => "MaxPooling1D",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense { .. } => "Dense",
            LayerKind::Dropout { .. } => "Dropout",
            LayerKind::Lstm { .. } => "LSTM",
            LayerKind::Bidirectional { .. } => "Bidirectional",
            LayerKind::ResidualAdd => "Add",
            LayerKind::Concat => "Concatenate",
            LayerKind::GlobalAvgPool => "GlobalAveragePooling1D",
            LayerKind::LayerNorm { .. } => "LayerNormalization",
            LayerKind::MultiHeadAttention { .. } => "MultiHeadAttention",
            LayerKind::TransformerBlock { .. } => "TransformerBlock",
        }
    }

    /// Number of inputs the layer consumes.
    pub fn arity(&self) -> usize {
        match self {
            LayerKind::Input { .. } => 0,
            LayerKind::ResidualAdd | LayerKind::Concat => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        let rate = |r: f64| {
            if (0.0..1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::Config(format!("dropout rate {r} outside [0, 1)")))
            }
        };
        match *self {
            LayerKind::Input { length, .. } => positive("input length", length),
            LayerKind::Embedding { vocab, dim, .. } => {
                positive("vocabulary size", vocab)?;
                positive("embedding width", dim)
            }
            LayerKind::TokenPositionEmbedding { vocab, maxlen, dim } => {
                positive("vocabulary size", vocab)?;
                positive("maximum length", maxlen)?;
                positive("embedding width", dim)
            }
            LayerKind::Conv1d {
                filters,
                kernel,
                stride,
                ..
            } => {
                positive("filters", filters)?;
                positive("kernel width", kernel)?;
                positive("stride", stride)
            }
            LayerKind::MaxPool1d { window, stride } => {
                positive("pool window", window)?;
                positive("pool stride", stride)
            }
            LayerKind::Dense { units, l2, .. } => {
                positive("units", units)?;
                match l2 {
                    Some(c) if c.is_nan() || c < 0.0 => {
                        Err(Error::Config(format!("L2 coefficient {c} is negative")))
                    }
                    _ => Ok(()),
                }
            }
            LayerKind::Dropout { rate: r } => rate(r),
            LayerKind::Lstm { units, .. } | LayerKind::Bidirectional { units, .. } => {
                positive("LSTM units", units)
            }
            LayerKind::LayerNorm { epsilon } => {
                if epsilon > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("layer-norm epsilon must be positive".into()))
                }
            }
            LayerKind::MultiHeadAttention { heads, key_width } => {
                positive("heads", heads)?;
                positive("key width", key_width)
            }
            LayerKind::TransformerBlock {
                heads,
                key_width,
                ff_width,
                dropout,
                epsilon,
            } => {
                positive("heads", heads)?;
                positive("key width", key_width)?;
                positive("feed-forward width", ff_width)?;
                rate(dropout)?;
                LayerKind::LayerNorm { epsilon }.validate()
            }
            LayerKind::Flatten
            | LayerKind::ResidualAdd
            | LayerKind::Concat
            | LayerKind::GlobalAvgPool => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.kind.type_name())
    }
}
