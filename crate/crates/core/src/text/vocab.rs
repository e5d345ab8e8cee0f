use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";

/// Lowercased runs of alphanumeric characters; everything else separates.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Id of `token`, or `None` for out-of-vocabulary tokens.
    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(OOV_ID)
    }
}

/// Pad and OOV ids first, then the `cap - 2` most frequent tokens; ties
/// break lexicographically.
pub fn build_word_vocab<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    cap: usize,
) -> Result<Vocabulary> {
    if cap < 2 {
        return Err(Error::Config(format!(
            "vocabulary cap {cap} leaves no room for pad and OOV ids"
        )));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for text in corpus {
        for tok in tokenize(text) {
            *freq.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = [PAD_TOKEN.to_owned(), OOV_TOKEN.to_owned()]
        .into_iter()
        .chain(ranked.into_iter().take(cap - 2).map(|(t, _)| t))
        .collect();
    Ok(Vocabulary::from_tokens(tokens))
}

/// Token ids truncated or right-padded to exactly `length`.
pub fn encode_words(text: &str, vocab: &Vocabulary, length: usize) -> Vec<u32> {
    let mut out: Vec<u32> = tokenize(text)
        .iter()
        .take(length)
        .map(|t| vocab.id(t))
        .collect();
    out.resize(length, PAD_ID);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_cap() {
        let v = build_word_vocab(["a a b"], 4).unwrap();
        assert_eq!(v.tokens(), [PAD_TOKEN, OOV_TOKEN, "a", "b"]);
        let v = build_word_vocab(["a a b"], 3).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.get("b"), None);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_word_vocab(["zeta alpha mid", "mid"], 10).unwrap();
        assert_eq!(v.tokens()[2..], ["mid", "alpha", "zeta"]);
    }

    #[test]
    fn empty_corpus_and_bad_cap() {
        assert_eq!(build_word_vocab([], 10).unwrap().len(), 2);
        assert!(build_word_vocab(["a"], 1).is_err());
    }

    #[test]
    fn encoding() {
        let v = build_word_vocab(["Hello, world"], 10).unwrap();
        assert_eq!(encode_words("", &v, 5), vec![PAD_ID; 5]);
        let ids = encode_words("hello there WORLD", &v, 4);
        assert_eq!(ids, vec![v.id("hello"), OOV_ID, v.id("world"), PAD_ID]);
        assert_eq!(encode_words(&"w ".repeat(300), &v, 100).len(), 100);
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Don't STOP-now!"), ["don", "t", "stop", "now"]);
    }
}
