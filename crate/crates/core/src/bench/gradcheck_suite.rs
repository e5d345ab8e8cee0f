//! Gradient checks for every layer kind and for miniature versions of the
//! four networks, all in 64-bit arithmetic.

use crate::architectures::{
    ArchitectureConfig, CharCnnConfig, CharStackConfig, ForwardMode, GloveConfig, Model,
    ModelInputs, ModelKind, ResConfig, TransformerConfig, WordEmbeddingConfig, NUM_CLASSES,
};
use crate::autodiff::{
    grad_check_with, Activation, GradCheckOptions, GradCheckReport, Graph, IdMatrix, Var,
    GRAD_CHECK_STEP,
};
use crate::error::Result;
use crate::layers::{
    infer, layer_forward, BoundParams, InputSource, LayerInput, LayerKind, LayerSpec,
};
use crate::rng::RngStream;
use crate::tensor::{Init, Tensor};
use crate::text::CharAlphabet;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckSuiteOptions {
    pub tolerance: f64,
    pub step: f64,
    pub seed: u64,
    /// Evenly spaced sample of elements per input tensor; `None` checks all.
    pub max_elements_per_input: Option<usize>,
    /// Wrap every loss in an op with a deliberately wrong derivative, to
    /// prove the checker can fail.
    pub inject_fault: bool,
}

impl Default for GradCheckSuiteOptions {
    fn default() -> Self {
        GradCheckSuiteOptions {
            tolerance: 1e-4,
            step: GRAD_CHECK_STEP,
            seed: 11,
            max_elements_per_input: Some(48),
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckCase {
    pub name: String,
    pub report: GradCheckReport,
}

#[derive(Clone, Debug)]
pub struct GradCheckSuiteReport {
    pub cases: Vec<GradCheckCase>,
}

impl GradCheckSuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.report.passed)
    }

    pub fn worst(&self) -> Option<&GradCheckCase> {
        self.cases.iter().max_by(|a, b| {
            a.report
                .max_relative_error
                .total_cmp(&b.report.max_relative_error)
        })
    }
}

const BATCH: usize = 2;

/// Pins the higher-ranked signature the checker expects on a closure.
fn scalar_fn<F>(f: F) -> F
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    f
}

/// Identity whose reported derivative is half the true one.
fn faulty<'g>(loss: Var<'g, f64>, inject: bool) -> Var<'g, f64> {
    if inject {
        loss.map_unary(|a| a, |_, _| 0.5)
    } else {
        loss
    }
}

fn uniform(shape: &[usize], rng: &mut RngStream) -> Result<Tensor<f64>> {
    Tensor::init(
        shape,
        &Init::Uniform {
            low: -0.5,
            high: 0.5,
        },
        rng,
    )
}

fn random_ids(rows: usize, cols: usize, vocab: usize, rng: &mut RngStream) -> Result<IdMatrix> {
    let ids = (0..rows * cols).map(|_| rng.below(vocab) as u32).collect();
    IdMatrix::new(rows, cols, ids)
}

enum Feed {
    /// Dense activation with this per-example shape.
    Dense(Vec<usize>),
    Ids {
        vocab: usize,
        length: usize,
    },
}

struct LayerCase {
    name: &'static str,
    spec: LayerSpec,
    feeds: Vec<Feed>,
    training: bool,
}

fn case(name: &'static str, kind: LayerKind, feeds: Vec<Feed>) -> LayerCase {
    LayerCase {
        name,
        spec: LayerSpec::new(name, kind),
        feeds,
        training: false,
    }
}

fn seq(t: usize, c: usize) -> Vec<Feed> {
    vec![Feed::Dense(vec![t, c])]
}

fn layer_cases() -> Vec<LayerCase> {
    let dense = |units, activation, l2| LayerKind::Dense {
        units,
        activation,
        l2,
    };
    let mut cases = vec![
        case(
            "dense_linear",
            dense(3, None, None),
            vec![Feed::Dense(vec![4])],
        ),
        case(
            "dense_relu",
            dense(3, Some(Activation::Relu), None),
            vec![Feed::Dense(vec![4])],
        ),
        case(
            "dense_tanh",
            dense(3, Some(Activation::Tanh), None),
            vec![Feed::Dense(vec![4])],
        ),
        case(
            "dense_sigmoid",
            dense(3, Some(Activation::Sigmoid), None),
            vec![Feed::Dense(vec![4])],
        ),
        case(
            "dense_softmax",
            dense(5, Some(Activation::Softmax), None),
            vec![Feed::Dense(vec![4])],
        ),
        case(
            "dense_l2_penalty",
            dense(3, Some(Activation::Relu), Some(1e-1)),
            vec![Feed::Dense(vec![4])],
        ),
        case("dense_sequence", dense(3, None, None), seq(3, 4)),
        case(
            "embedding",
            LayerKind::Embedding {
                vocab: 6,
                dim: 3,
                trainable: true,
            },
            vec![Feed::Ids {
                vocab: 6,
                length: 4,
            }],
        ),
        case(
            "token_position_embedding",
            LayerKind::TokenPositionEmbedding {
                vocab: 6,
                maxlen: 5,
                dim: 3,
            },
            vec![Feed::Ids {
                vocab: 6,
                length: 4,
            }],
        ),
        case(
            "conv1d_relu",
            LayerKind::Conv1d {
                filters: 3,
                kernel: 3,
                stride: 1,
                activation: Some(Activation::Relu),
            },
            seq(7, 2),
        ),
        case(
            "conv1d_strided",
            LayerKind::Conv1d {
                filters: 2,
                kernel: 2,
                stride: 2,
                activation: None,
            },
            seq(7, 3),
        ),
        case(
            "max_pooling1d",
            LayerKind::MaxPool1d {
                window: 3,
                stride: 2,
            },
            seq(8, 3),
        ),
        case("flatten", LayerKind::Flatten, seq(3, 2)),
        case(
            "lstm_sequences",
            LayerKind::Lstm {
                units: 3,
                return_sequences: true,
            },
            seq(4, 2),
        ),
        case(
            "lstm_last",
            LayerKind::Lstm {
                units: 3,
                return_sequences: false,
            },
            seq(4, 2),
        ),
        case(
            "bidirectional_sequences",
            LayerKind::Bidirectional {
                units: 2,
                return_sequences: true,
            },
            seq(4, 3),
        ),
        case(
            "bidirectional_last",
            LayerKind::Bidirectional {
                units: 2,
                return_sequences: false,
            },
            seq(4, 3),
        ),
        case(
            "residual_add",
            LayerKind::ResidualAdd,
            vec![Feed::Dense(vec![3, 2]), Feed::Dense(vec![3, 2])],
        ),
        case(
            "concatenate",
            LayerKind::Concat,
            vec![Feed::Dense(vec![3]), Feed::Dense(vec![3])],
        ),
        case(
            "global_average_pooling1d",
            LayerKind::GlobalAvgPool,
            seq(4, 3),
        ),
        case(
            "layer_normalization",
            LayerKind::LayerNorm { epsilon: 1e-6 },
            seq(3, 4),
        ),
        case(
            "multi_head_attention",
            LayerKind::MultiHeadAttention {
                heads: 2,
                key_width: 2,
            },
            seq(3, 4),
        ),
        case(
            "transformer_block",
            LayerKind::TransformerBlock {
                heads: 2,
                key_width: 2,
                ff_width: 5,
                dropout: 0.1,
                epsilon: 1e-6,
            },
            seq(3, 4),
        ),
    ];
    let mut dropout = case("dropout", LayerKind::Dropout { rate: 0.5 }, seq(3, 4));
    dropout.training = true;
    cases.push(dropout);
    let mut block = case(
        "transformer_block_training",
        LayerKind::TransformerBlock {
            heads: 2,
            key_width: 2,
            ff_width: 5,
            dropout: 0.3,
            epsilon: 1e-6,
        },
        seq(3, 4),
    );
    block.training = true;
    cases.push(block);
    cases
}

fn check_layer(
    case: &LayerCase,
    options: &GradCheckSuiteOptions,
    rng: &mut RngStream,
) -> Result<GradCheckReport> {
    let shapes: Vec<Vec<usize>> = case
        .feeds
        .iter()
        .map(|f| match f {
            Feed::Dense(s) => s.clone(),
            Feed::Ids { length, .. } => vec![*length],
        })
        .collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let (out_shape, bundle) = infer(&case.spec, &shape_refs)?;

    let mut inputs = Vec::new();
    let mut ids = Vec::new();
    for feed in &case.feeds {
        match feed {
            Feed::Dense(s) => {
                let mut full = vec![BATCH];
                full.extend(s);
                inputs.push(uniform(&full, rng)?);
            }
            Feed::Ids { vocab, length } => ids.push(random_ids(BATCH, *length, *vocab, rng)?),
        }
    }
    let dense_inputs = inputs.len();
    for p in &bundle.params {
        inputs.push(uniform(&p.shape, rng)?);
    }
    let mut full_out = vec![BATCH];
    full_out.extend(&out_shape);
    let projection = uniform(&full_out, rng)?;
    let mask_seed = rng.next_u64();

    let f = scalar_fn(|graph, vars| {
        let mut dense = vars[..dense_inputs].iter();
        let mut id_iter = ids.iter();
        let args: Vec<_> = case
            .feeds
            .iter()
            .map(|feed| match feed {
                Feed::Dense(_) => LayerInput::Dense(*dense.next().expect("one var per feed")),
                Feed::Ids { .. } => LayerInput::Ids(id_iter.next().expect("one matrix per feed")),
            })
            .collect();
        let params = BoundParams::new(&bundle, &vars[dense_inputs..]);
        let mut masks = RngStream::new(mask_seed);
        let out = layer_forward(graph, &case.spec, &args, &params, case.training, &mut masks)?;
        let LayerInput::Dense(y) = out.value else {
            unreachable!("non-input layers emit activations")
        };
        let mut loss = y.mul(graph.constant(projection.clone()))?.sum();
        if let Some(p) = out.penalty {
            loss = loss.add(p)?;
        }
        Ok(faulty(loss, options.inject_fault))
    });
    grad_check_with(f, &inputs, grad_options(options))
}

fn grad_options(options: &GradCheckSuiteOptions) -> GradCheckOptions {
    GradCheckOptions {
        tolerance: options.tolerance,
        step: options.step,
        max_elements_per_input: options.max_elements_per_input,
    }
}

fn check_sparse_cce(
    options: &GradCheckSuiteOptions,
    rng: &mut RngStream,
) -> Result<GradCheckReport> {
    let logits = uniform(&[3, NUM_CLASSES], rng)?;
    let labels = [0, 3, 4];
    grad_check_with(
        |_, v| {
            Ok(faulty(
                v[0].softmax().sparse_cce(&labels)?,
                options.inject_fault,
            ))
        },
        &[logits],
        grad_options(options),
    )
}

/// Miniature configuration that keeps every layer of every network.
pub fn tiny_architectures() -> ArchitectureConfig {
    let chars = CharStackConfig {
        vocab: CharAlphabet::standard().vocab_size(),
        embed_dim: 3,
        length: 40,
        filters: 3,
        wide_kernel: 3,
        narrow_kernel: 2,
        narrow_convs: 4,
        pool_window: 2,
        pool_stride: 2,
    };
    let words = WordEmbeddingConfig {
        vocab: 15,
        dim: 4,
        length: 6,
        trainable: false,
    };
    ArchitectureConfig {
        char_cnn: CharCnnConfig {
            chars: chars.clone(),
            dense_units: 5,
            head_units: 4,
            ..CharCnnConfig::default()
        },
        glove_bilstm: GloveConfig {
            words: words.clone(),
            lstm_units: 3,
            head_units: 4,
            ..GloveConfig::default()
        },
        res_cnn_bilstm: ResConfig {
            chars,
            words,
            lstm_units: 2,
            lstm_layers: 4,
            bridge_units: 2,
            head_units: 4,
            ..ResConfig::default()
        },
        transformer: TransformerConfig {
            vocab: 15,
            maxlen: 6,
            length: 6,
            dim: 4,
            heads: 2,
            key_width: 3,
            ff_width: 5,
            hidden_units: 4,
            ..TransformerConfig::default()
        },
    }
}

/// Cross-entropy plus penalties of a miniature network in training mode,
/// with dropout masks fixed across evaluations.
fn check_architecture(
    kind: ModelKind,
    arch: &ArchitectureConfig,
    options: &GradCheckSuiteOptions,
    rng: &mut RngStream,
) -> Result<GradCheckReport> {
    const ROWS: usize = 3;
    let model: Model<f64> = Model::init(arch.build(kind)?, rng)?;
    let mut chars = None;
    let mut words = None;
    for (_, source, length) in model.graph().inputs() {
        match source {
            InputSource::Chars => {
                let vocab = match kind {
                    ModelKind::ResCnnBilstm => arch.res_cnn_bilstm.chars.vocab,
                    _ => arch.char_cnn.chars.vocab,
                };
                chars = Some(random_ids(ROWS, length, vocab, rng)?);
            }
            InputSource::Words => {
                let vocab = arch.word_vocab(kind).expect("word model");
                words = Some(random_ids(ROWS, length, vocab, rng)?);
            }
        }
    }
    let labels: Vec<usize> = (0..ROWS).map(|_| rng.below(NUM_CLASSES)).collect();
    let mask_seed = rng.next_u64();

    let trainable: Vec<bool> = model.param_specs().map(|(_, p)| p.trainable).collect();
    // Jitter every trainable value so zero-initialized biases do not sit a
    // ReLU exactly on its kink when an upstream row is fully dropped.
    let mut inputs = Vec::new();
    for (p, _) in model
        .parameters()
        .iter()
        .zip(&trainable)
        .filter(|(_, &t)| t)
    {
        let noise = Tensor::<f64>::init(
            p.shape(),
            &Init::Uniform {
                low: -0.1,
                high: 0.1,
            },
            rng,
        )?;
        let mut jittered = (**p).clone();
        jittered.add_assign(&noise);
        inputs.push(jittered);
    }

    let f = scalar_fn(|graph, vars| {
        let mut free = vars.iter();
        let bound: Vec<_> = model
            .parameters()
            .iter()
            .zip(&trainable)
            .map(|(p, &t)| {
                if t {
                    *free.next().expect("one var per trainable parameter")
                } else {
                    graph.constant((**p).clone())
                }
            })
            .collect();
        let feed = ModelInputs {
            chars: chars.as_ref(),
            words: words.as_ref(),
        };
        let mut masks = RngStream::new(mask_seed);
        let out = model.forward(graph, &bound, feed, ForwardMode::Train(&mut masks))?;
        let mut loss = out.probs.sparse_cce(&labels)?;
        if let Some(p) = out.penalty {
            loss = loss.add(p)?;
        }
        Ok(faulty(loss, options.inject_fault))
    });
    grad_check_with(f, &inputs, grad_options(options))
}

/// Runs every layer case, the loss case, and the four miniature networks.
pub fn run_gradcheck_suite(options: &GradCheckSuiteOptions) -> Result<GradCheckSuiteReport> {
    let mut rng = RngStream::new(options.seed);
    let mut cases = Vec::new();
    for layer in layer_cases() {
        let report = check_layer(&layer, options, &mut rng)?;
        cases.push(GradCheckCase {
            name: layer.name.to_owned(),
            report,
        });
    }
    cases.push(GradCheckCase {
        name: "sparse_categorical_crossentropy".into(),
        report: check_sparse_cce(options, &mut rng)?,
    });
    let arch = tiny_architectures();
    for kind in ModelKind::ALL {
        cases.push(GradCheckCase {
            name: format!("tiny {}", kind.id()),
            report: check_architecture(kind, &arch, options, &mut rng)?,
        });
    }
    Ok(GradCheckSuiteReport { cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_fault_is_caught() {
        let report = run_gradcheck_suite(&GradCheckSuiteOptions::default()).unwrap();
        assert!(report.passed(), "{:?}", report.worst());
        let faulty = run_gradcheck_suite(&GradCheckSuiteOptions {
            inject_fault: true,
            ..GradCheckSuiteOptions::default()
        })
        .unwrap();
        assert!(faulty.cases.iter().all(|c| !c.report.passed));
    }
}
