//! From a labeled dataset to a ready-to-train model and encoded splits.

use std::path::PathBuf;

use crate::architectures::{ArchitectureConfig, Model, ModelKind, WORD_BRANCH};
use crate::error::Result;
use crate::rng::RngStream;
use crate::tensor::{Element, Tensor};
use crate::text::{
    build_word_vocab, encode_corpus, load_glove_embeddings, stratified_split, CharAlphabet,
    Dataset, EmbeddingMatrix, EncodedCorpus, Vocabulary,
};

/// Source of the frozen word-embedding table.
#[derive(Clone, Debug, PartialEq)]
pub enum Pretrained {
    /// A GloVe-format text file.
    File(PathBuf),
    /// Uniform random vectors in `[-0.5, 0.5)`, one per vocabulary token.
    Random { seed: u64 },
}

pub struct Prepared<T: Element> {
    pub kind: ModelKind,
    pub model: Model<T>,
    pub train: EncodedCorpus,
    pub val: Option<EncodedCorpus>,
    pub vocab: Option<Vocabulary>,
    /// `(hits, misses)` of the pretrained lookup.
    pub coverage: Option<(usize, usize)>,
}

fn random_table(vocab: &Vocabulary, dim: usize, seed: u64) -> Tensor<f64> {
    let mut rng = RngStream::new(seed);
    let mut data = vec![0.0; vocab.len() * dim];
    for v in &mut data[2 * dim..] {
        *v = rng.uniform(-0.5, 0.5);
    }
    Tensor::from_vec(&[vocab.len(), dim], data).expect("sized above")
}

/// Builds and initializes `kind`, encodes `dataset` for it, loads the
/// frozen table where needed, and splits off a stratified validation set.
pub fn prepare<T: Element>(
    kind: ModelKind,
    arch: &ArchitectureConfig,
    dataset: &Dataset,
    pretrained: &Pretrained,
    validation_split: f64,
    seed: u64,
) -> Result<Prepared<T>> {
    let graph = arch.build(kind)?;
    let mut root = RngStream::new(seed);
    let mut init_rng = root.fork();
    let mut split_rng = root.fork();
    let mut model = Model::<T>::init(graph, &mut init_rng)?;

    let alphabet = CharAlphabet::standard();
    let vocab = match arch.word_vocab(kind) {
        Some(cap) => Some(build_word_vocab(dataset.texts(), cap)?),
        None => None,
    };
    let encoded = encode_corpus(
        dataset,
        arch.char_length(kind).map(|len| (&alphabet, len)),
        vocab.as_ref().zip(arch.word_length(kind)),
    );

    let mut coverage = None;
    if kind.uses_pretrained_words() {
        let vocab = vocab.as_ref().expect("word models build a vocabulary");
        let (layer, rows, dim) = match kind {
            ModelKind::GloveBilstm => {
                let w = &arch.glove_bilstm.words;
                ("embedding".to_owned(), w.vocab, w.dim)
            }
            _ => {
                let w = &arch.res_cnn_bilstm.words;
                (format!("{WORD_BRANCH}_embedding"), w.vocab, w.dim)
            }
        };
        let table = match pretrained {
            Pretrained::File(path) => {
                let m = load_glove_embeddings(path, vocab, dim)?;
                coverage = Some((m.hits, m.misses));
                m.padded_to(rows)?
            }
            Pretrained::Random { seed } => {
                let m = EmbeddingMatrix {
                    table: random_table(vocab, dim, *seed),
                    hits: vocab.len().saturating_sub(2),
                    misses: 0,
                };
                m.padded_to(rows)?
            }
        };
        model.set_parameter(&layer, "embeddings", table.to_precision())?;
    }

    let (train, val) = if validation_split > 0.0 {
        let (tr, va) = stratified_split(&encoded.labels, validation_split, &mut split_rng)?;
        (encoded.subset(&tr), Some(encoded.subset(&va)))
    } else {
        (encoded, None)
    };
    Ok(Prepared {
        kind,
        model,
        train,
        val,
        vocab,
        coverage,
    })
}
