use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::graph::{ModelGraph, NodeId};
use crate::autodiff::Activation;
use crate::error::{Error, Result};
use crate::layers::{InputSource, LayerKind, LayerSpec, LAYER_NORM_EPSILON};

pub const NUM_CLASSES: usize = 5;

/// The four networks, in the column order of the curve files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CharCnn,
    GloveBilstm,
    ResCnnBilstm,
    Transformer,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::CharCnn,
        ModelKind::GloveBilstm,
        ModelKind::ResCnnBilstm,
        ModelKind::Transformer,
    ];

    /// Command-line identifier.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::CharCnn => "char-cnn",
            ModelKind::GloveBilstm => "glove-bilstm",
            ModelKind::ResCnnBilstm => "res-cnn-bilstm",
            ModelKind::Transformer => "transformer",
        }
    }

    /// Column label in curve and timing files.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::CharCnn => "1-D Char",
            ModelKind::GloveBilstm => "Glove",
            ModelKind::ResCnnBilstm => "Res-CNN-BiLSTM",
            ModelKind::Transformer => "Transformer",
        }
    }

    pub fn from_label(label: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.label() == label)
    }

    /// Whether the model consumes a pretrained word-embedding table.
    pub fn uses_pretrained_words(self) -> bool {
        matches!(self, ModelKind::GloveBilstm | ModelKind::ResCnnBilstm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == wanted || k.label().to_ascii_lowercase() == wanted)
            .ok_or_else(|| Error::UnknownModel(s.to_owned()))
    }
}

fn shrink(width: usize, divisor: usize) -> usize {
    (width / divisor.max(1)).max(1)
}

/// Character embedding followed by the convolution/pooling stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharStackConfig {
    pub vocab: usize,
    pub embed_dim: usize,
    pub length: usize,
    pub filters: usize,
    pub wide_kernel: usize,
    pub narrow_kernel: usize,
    /// Number of narrow convolutions between the second and third pool.
    pub narrow_convs: usize,
    pub pool_window: usize,
    pub pool_stride: usize,
}

impl Default for CharStackConfig {
    fn default() -> Self {
        CharStackConfig {
            vocab: 70,
            embed_dim: 69,
            length: 1014,
            filters: 256,
            wide_kernel: 7,
            narrow_kernel: 3,
            narrow_convs: 4,
            pool_window: 3,
            pool_stride: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharCnnConfig {
    pub chars: CharStackConfig,
    pub dense_units: usize,
    pub head_units: usize,
    pub dropout: f64,
    /// L2 activity/bias penalty on the two wide dense layers.
    pub l2: f64,
    pub classes: usize,
}

impl Default for CharCnnConfig {
    fn default() -> Self {
        CharCnnConfig {
            chars: CharStackConfig::default(),
            dense_units: 1024,
            head_units: 32,
            dropout: 0.5,
            l2: 1e-3,
            classes: NUM_CLASSES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordEmbeddingConfig {
    pub vocab: usize,
    pub dim: usize,
    pub length: usize,
    pub trainable: bool,
}

impl Default for WordEmbeddingConfig {
    fn default() -> Self {
        WordEmbeddingConfig {
            vocab: 28_870,
            dim: 100,
            length: 100,
            trainable: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GloveConfig {
    pub words: WordEmbeddingConfig,
    pub lstm_units: usize,
    pub head_units: usize,
    pub classes: usize,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            words: WordEmbeddingConfig::default(),
            lstm_units: 512,
            head_units: 32,
            classes: NUM_CLASSES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResConfig {
    pub chars: CharStackConfig,
    pub words: WordEmbeddingConfig,
    pub lstm_units: usize,
    /// Sequence BiLSTMs per branch; the first and last are summed.
    pub lstm_layers: usize,
    pub bridge_units: usize,
    pub head_units: usize,
    pub classes: usize,
}

impl Default for ResConfig {
    fn default() -> Self {
        ResConfig {
            chars: CharStackConfig::default(),
            words: WordEmbeddingConfig::default(),
            lstm_units: 512,
            lstm_layers: 4,
            bridge_units: 64,
            head_units: 32,
            classes: NUM_CLASSES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformerConfig {
    pub vocab: usize,
    pub maxlen: usize,
    /// Input sequence length; at most `maxlen`.
    pub length: usize,
    pub dim: usize,
    pub heads: usize,
    pub key_width: usize,
    pub ff_width: usize,
    pub block_dropout: f64,
    pub epsilon: f64,
    pub dropout: f64,
    pub hidden_units: usize,
    pub classes: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            vocab: 20_000,
            maxlen: 100,
            length: 100,
            dim: 32,
            heads: 2,
            key_width: 32,
            ff_width: 32,
            block_dropout: 0.1,
            epsilon: LAYER_NORM_EPSILON,
            dropout: 0.5,
            hidden_units: 20,
            classes: NUM_CLASSES,
        }
    }
}

/// One configuration per network.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub char_cnn: CharCnnConfig,
    pub glove_bilstm: GloveConfig,
    pub res_cnn_bilstm: ResConfig,
    pub transformer: TransformerConfig,
}

impl ArchitectureConfig {
    /// Divides hidden widths (filters, dense and LSTM units, attention and
    /// feed-forward widths) by `width`, and input lengths by `length`.
    /// Vocabularies, embedding widths, and head layers are unchanged.
    pub fn scaled(&self, width: usize, length: usize) -> Self {
        let mut c = self.clone();
        let chars = |s: &mut CharStackConfig| {
            s.filters = shrink(s.filters, width);
            s.length = shrink(s.length, length);
        };
        let words = |w: &mut WordEmbeddingConfig| w.length = shrink(w.length, length);

        chars(&mut c.char_cnn.chars);
        c.char_cnn.dense_units = shrink(c.char_cnn.dense_units, width);

        words(&mut c.glove_bilstm.words);
        c.glove_bilstm.lstm_units = shrink(c.glove_bilstm.lstm_units, width);

        chars(&mut c.res_cnn_bilstm.chars);
        words(&mut c.res_cnn_bilstm.words);
        c.res_cnn_bilstm.lstm_units = shrink(c.res_cnn_bilstm.lstm_units, width);
        c.res_cnn_bilstm.bridge_units = shrink(c.res_cnn_bilstm.bridge_units, width);

        let t = &mut c.transformer;
        t.key_width = shrink(t.key_width, width);
        t.ff_width = shrink(t.ff_width, width);
        t.length = shrink(t.length, length);
        c
    }

    /// Character sequence length consumed by `kind`, if any.
    pub fn char_length(&self, kind: ModelKind) -> Option<usize> {
        match kind {
            ModelKind::CharCnn => Some(self.char_cnn.chars.length),
            ModelKind::ResCnnBilstm => Some(self.res_cnn_bilstm.chars.length),
            _ => None,
        }
    }

    /// Word sequence length consumed by `kind`, if any.
    pub fn word_length(&self, kind: ModelKind) -> Option<usize> {
        match kind {
            ModelKind::GloveBilstm => Some(self.glove_bilstm.words.length),
            ModelKind::ResCnnBilstm => Some(self.res_cnn_bilstm.words.length),
            ModelKind::Transformer => Some(self.transformer.length),
            ModelKind::CharCnn => None,
        }
    }

    /// Word vocabulary size expected by `kind`, if any.
    pub fn word_vocab(&self, kind: ModelKind) -> Option<usize> {
        match kind {
            ModelKind::GloveBilstm => Some(self.glove_bilstm.words.vocab),
            ModelKind::ResCnnBilstm => Some(self.res_cnn_bilstm.words.vocab),
            ModelKind::Transformer => Some(self.transformer.vocab),
            ModelKind::CharCnn => None,
        }
    }

    pub fn build(&self, kind: ModelKind) -> Result<ModelGraph> {
        match kind {
            ModelKind::CharCnn => build_char_cnn(&self.char_cnn),
            ModelKind::GloveBilstm => build_glove_bilstm(&self.glove_bilstm),
            ModelKind::ResCnnBilstm => build_res_cnn_bilstm(&self.res_cnn_bilstm),
            ModelKind::Transformer => build_transformer(&self.transformer),
        }
    }
}

struct Builder<'a> {
    graph: &'a mut ModelGraph,
    prefix: &'a str,
    branch: Option<&'a str>,
}

impl Builder<'_> {
    fn add(&mut self, name: &str, kind: LayerKind, inputs: &[NodeId]) -> Result<NodeId> {
        let spec = LayerSpec::new(format!("{}{name}", self.prefix), kind);
        self.graph.add_in_branch(spec, inputs, self.branch)
    }

    fn char_stack(&mut self, cfg: &CharStackConfig) -> Result<NodeId> {
        let x = self.add(
            "chars",
            LayerKind::Input {
                source: InputSource::Chars,
                length: cfg.length,
            },
            &[],
        )?;
        let mut x = self.add(
            "embedding",
            LayerKind::Embedding {
                vocab: cfg.vocab,
                dim: cfg.embed_dim,
                trainable: true,
            },
            &[x],
        )?;
        let conv = |kernel| LayerKind::Conv1d {
            filters: cfg.filters,
            kernel,
            stride: 1,
            activation: Some(Activation::Relu),
        };
        let pool = LayerKind::MaxPool1d {
            window: cfg.pool_window,
            stride: cfg.pool_stride,
        };
        let mut convs = 0;
        let mut pools = 0;
        let mut push_conv = |b: &mut Self, x: NodeId, kernel: usize| {
            convs += 1;
            b.add(&format!("conv1d_{convs}"), conv(kernel), &[x])
        };
        for _ in 0..2 {
            x = push_conv(self, x, cfg.wide_kernel)?;
            pools += 1;
            x = self.add(&format!("max_pooling1d_{pools}"), pool.clone(), &[x])?;
        }
        for _ in 0..cfg.narrow_convs {
            x = push_conv(self, x, cfg.narrow_kernel)?;
        }
        pools += 1;
        self.add(&format!("max_pooling1d_{pools}"), pool, &[x])
    }

    fn word_embedding(&mut self, cfg: &WordEmbeddingConfig) -> Result<NodeId> {
        let x = self.add(
            "words",
            LayerKind::Input {
                source: InputSource::Words,
                length: cfg.length,
            },
            &[],
        )?;
        self.add(
            "embedding",
            LayerKind::Embedding {
                vocab: cfg.vocab,
                dim: cfg.dim,
                trainable: cfg.trainable,
            },
            &[x],
        )
    }

    /// Sequence BiLSTMs with the first and last outputs summed, then a
    /// final-state BiLSTM.
    fn residual_bilstms(&mut self, x: NodeId, cfg: &ResConfig) -> Result<NodeId> {
        let seq = LayerKind::Bidirectional {
            units: cfg.lstm_units,
            return_sequences: true,
        };
        let first = self.add("bidirectional_1", seq.clone(), &[x])?;
        let mut last = first;
        for i in 2..=cfg.lstm_layers {
            last = self.add(&format!("bidirectional_{i}"), seq.clone(), &[last])?;
        }
        let sum = self.add("add", LayerKind::ResidualAdd, &[first, last])?;
        self.add(
            &format!("bidirectional_{}", cfg.lstm_layers + 1),
            LayerKind::Bidirectional {
                units: cfg.bridge_units,
                return_sequences: false,
            },
            &[sum],
        )
    }
}

fn dense(units: usize, activation: Activation) -> LayerKind {
    LayerKind::Dense {
        units,
        activation: Some(activation),
        l2: None,
    }
}

fn root(graph: &mut ModelGraph) -> Builder<'_> {
    Builder {
        graph,
        prefix: "",
        branch: None,
    }
}

pub fn build_char_cnn(cfg: &CharCnnConfig) -> Result<ModelGraph> {
    let mut graph = ModelGraph::new(ModelKind::CharCnn.id());
    let mut b = root(&mut graph);
    let x = b.char_stack(&cfg.chars)?;
    let x = b.add("flatten", LayerKind::Flatten, &[x])?;
    let wide = LayerKind::Dense {
        units: cfg.dense_units,
        activation: Some(Activation::Relu),
        l2: Some(cfg.l2),
    };
    let drop = LayerKind::Dropout { rate: cfg.dropout };
    let x = b.add("dense_1", wide.clone(), &[x])?;
    let x = b.add("dropout_1", drop.clone(), &[x])?;
    let x = b.add("dense_2", wide, &[x])?;
    let x = b.add("dropout_2", drop, &[x])?;
    let x = b.add("dense_3", dense(cfg.head_units, Activation::Relu), &[x])?;
    let out = b.add("dense_4", dense(cfg.classes, Activation::Softmax), &[x])?;
    graph.set_output(out);
    Ok(graph)
}

pub fn build_glove_bilstm(cfg: &GloveConfig) -> Result<ModelGraph> {
    let mut graph = ModelGraph::new(ModelKind::GloveBilstm.id());
    let mut b = root(&mut graph);
    let x = b.word_embedding(&cfg.words)?;
    let x = b.add(
        "bidirectional",
        LayerKind::Bidirectional {
            units: cfg.lstm_units,
            return_sequences: false,
        },
        &[x],
    )?;
    let x = b.add("dense_1", dense(cfg.head_units, Activation::Relu), &[x])?;
    let out = b.add("dense_2", dense(cfg.classes, Activation::Softmax), &[x])?;
    graph.set_output(out);
    Ok(graph)
}

/// Branch names of the two-input network.
pub const CHAR_BRANCH: &str = "char";
pub const WORD_BRANCH: &str = "word";

pub fn build_res_cnn_bilstm(cfg: &ResConfig) -> Result<ModelGraph> {
    if cfg.lstm_layers < 2 {
        return Err(Error::Config(format!(
            "residual wiring needs at least 2 sequence BiLSTMs, got {}",
            cfg.lstm_layers
        )));
    }
    let mut graph = ModelGraph::new(ModelKind::ResCnnBilstm.id());
    let chars = {
        let mut b = Builder {
            graph: &mut graph,
            prefix: "char_",
            branch: Some(CHAR_BRANCH),
        };
        let x = b.char_stack(&cfg.chars)?;
        b.residual_bilstms(x, cfg)?
    };
    let words = {
        let mut b = Builder {
            graph: &mut graph,
            prefix: "word_",
            branch: Some(WORD_BRANCH),
        };
        let x = b.word_embedding(&cfg.words)?;
        b.residual_bilstms(x, cfg)?
    };
    let mut b = root(&mut graph);
    let x = b.add("concatenate", LayerKind::Concat, &[chars, words])?;
    let x = b.add("dense_1", dense(cfg.head_units, Activation::Relu), &[x])?;
    let out = b.add("dense_2", dense(cfg.classes, Activation::Softmax), &[x])?;
    graph.set_output(out);
    Ok(graph)
}

pub fn build_transformer(cfg: &TransformerConfig) -> Result<ModelGraph> {
    let mut graph = ModelGraph::new(ModelKind::Transformer.id());
    let mut b = root(&mut graph);
    let x = b.add(
        "words",
        LayerKind::Input {
            source: InputSource::Words,
            length: cfg.length,
        },
        &[],
    )?;
    let x = b.add(
        "token_and_position_embedding",
        LayerKind::TokenPositionEmbedding {
            vocab: cfg.vocab,
            maxlen: cfg.maxlen,
            dim: cfg.dim,
        },
        &[x],
    )?;
    let x = b.add(
        "transformer_block",
        LayerKind::TransformerBlock {
            heads: cfg.heads,
            key_width: cfg.key_width,
            ff_width: cfg.ff_width,
            dropout: cfg.block_dropout,
            epsilon: cfg.epsilon,
        },
        &[x],
    )?;
    let x = b.add("global_average_pooling1d", LayerKind::GlobalAvgPool, &[x])?;
    let drop = LayerKind::Dropout { rate: cfg.dropout };
    let x = b.add("dropout_1", drop.clone(), &[x])?;
    let x = b.add("dense_1", dense(cfg.hidden_units, Activation::Relu), &[x])?;
    let x = b.add("dropout_2", drop, &[x])?;
    let x = b.add("dense_2", dense(cfg.hidden_units, Activation::Relu), &[x])?;
    let out = b.add("dense_3", dense(cfg.classes, Activation::Softmax), &[x])?;
    graph.set_output(out);
    Ok(graph)
}
