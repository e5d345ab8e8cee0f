use serde::{Deserialize, Serialize};

use crate::architectures::NUM_CLASSES;
use crate::rng::RngStream;
use crate::text::{Dataset, LabeledExample};

/// Generator settings for a separable labeled corpus: filler words plus
/// class-specific keywords at random positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub examples: usize,
    pub seed: u64,
    pub words_per_example: usize,
    pub keywords_per_example: usize,
    pub keywords_per_class: usize,
    pub filler_words: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            examples: 2000,
            seed: 7,
            words_per_example: 20,
            keywords_per_example: 10,
            keywords_per_class: 6,
            filler_words: 300,
        }
    }
}

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

fn pseudo_word(rng: &mut RngStream, len: usize) -> String {
    (0..len)
        .map(|_| LETTERS[rng.below(LETTERS.len())] as char)
        .collect()
}

/// Deterministic five-class corpus; labels cycle so classes are balanced.
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Dataset {
    let mut rng = RngStream::new(spec.seed);
    let mut taken = std::collections::HashSet::new();
    let mut fresh = |rng: &mut RngStream, len: usize| loop {
        let w = pseudo_word(rng, len);
        if taken.insert(w.clone()) {
            return w;
        }
    };
    let filler: Vec<String> = (0..spec.filler_words)
        .map(|_| {
            let len = 3 + rng.below(5);
            fresh(&mut rng, len)
        })
        .collect();
    let keywords: Vec<Vec<String>> = (0..NUM_CLASSES)
        .map(|_| {
            (0..spec.keywords_per_class)
                .map(|_| fresh(&mut rng, 6))
                .collect()
        })
        .collect();
    let examples = (0..spec.examples)
        .map(|i| {
            let label = i % NUM_CLASSES;
            let mut words: Vec<&str> = (0..spec.words_per_example)
                .map(|_| filler[rng.below(filler.len())].as_str())
                .collect();
            for _ in 0..spec.keywords_per_example.min(words.len()) {
                let slot = rng.below(words.len());
                let kw = &keywords[label][rng.below(keywords[label].len())];
                words[slot] = kw;
            }
            LabeledExample {
                text: words.join(" "),
                label,
            }
        })
        .collect();
    Dataset {
        examples,
        classes: (0..NUM_CLASSES).map(|c| format!("class_{c}")).collect(),
    }
}
