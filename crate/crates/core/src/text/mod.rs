//! Character and word encoders, pretrained embedding ingestion, dataset
//! loading, and batching.

mod chars;
mod dataset;
mod glove;
mod vocab;

pub use chars::{encode_chars, CharAlphabet, PUNCTUATION};
pub use dataset::{
    batch_iterator, encode_corpus, load_labeled_csv, read_labeled_csv, stratified_split, Dataset,
    EncodedCorpus, LabeledExample,
};
pub use glove::{load_glove_embeddings, read_glove_embeddings, EmbeddingMatrix, GLOVE_DIM};
pub use vocab::{
    build_word_vocab, encode_words, tokenize, Vocabulary, OOV_ID, OOV_TOKEN, PAD_ID, PAD_TOKEN,
};
