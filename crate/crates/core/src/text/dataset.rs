use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::chars::{encode_chars, CharAlphabet};
use super::vocab::{encode_words, Vocabulary};
use crate::architectures::NUM_CLASSES;
use crate::autodiff::IdMatrix;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    /// Class names indexed by label id, in order of first appearance.
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.text.as_str())
    }
}

/// Reads a headed CSV with `text` and `label` columns holding exactly five
/// distinct labels.
pub fn load_labeled_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_csv(file)
}

pub fn read_labeled_csv(reader: impl Read) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (text_col, label_col) = (column("text")?, column("label")?);
    let mut classes: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut examples = Vec::new();
    for record in csv.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let name = field(label_col).trim().to_owned();
        let label = *ids.entry(name.clone()).or_insert_with(|| {
            classes.push(name);
            classes.len() - 1
        });
        examples.push(LabeledExample {
            text: field(text_col).to_owned(),
            label,
        });
    }
    if classes.len() != NUM_CLASSES {
        return Err(Error::Dataset(format!(
            "expected {NUM_CLASSES} distinct labels, found {} ({})",
            classes.len(),
            classes.join(", ")
        )));
    }
    Ok(Dataset { examples, classes })
}

/// Index batches covering `0..n` exactly once; shuffled from `rng` when
/// requested. The last batch may be short.
pub fn batch_iterator(
    n: usize,
    batch: usize,
    shuffle: bool,
    rng: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    if batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    Ok(order.chunks(batch).map(<[usize]>::to_vec).collect())
}

/// Per-class split: `round(fraction * class size)` shuffled indices of each
/// class go to validation. Both halves are returned sorted.
pub fn stratified_split(
    labels: &[usize],
    fraction: f64,
    rng: &mut RngStream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "validation fraction {fraction} outside [0, 1)"
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut members in by_class {
        rng.shuffle(&mut members);
        let k = (fraction * members.len() as f64).round() as usize;
        val.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Encoded model inputs and labels for a whole dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedCorpus {
    pub chars: Option<IdMatrix>,
    pub words: Option<IdMatrix>,
    pub labels: Vec<usize>,
}

impl EncodedCorpus {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> EncodedCorpus {
        EncodedCorpus {
            chars: self.chars.as_ref().map(|m| m.gather(rows)),
            words: self.words.as_ref().map(|m| m.gather(rows)),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

/// Encodes every example for the requested input kinds.
pub fn encode_corpus(
    dataset: &Dataset,
    chars: Option<(&CharAlphabet, usize)>,
    words: Option<(&Vocabulary, usize)>,
) -> EncodedCorpus {
    let n = dataset.len();
    let matrix = |len: usize, encode: &dyn Fn(&str) -> Vec<u32>| {
        let ids = dataset.texts().flat_map(encode).collect();
        IdMatrix::new(n, len, ids).expect("encoders emit exactly `len` ids")
    };
    EncodedCorpus {
        chars: chars.map(|(a, len)| matrix(len, &|t| encode_chars(t, a, len))),
        words: words.map(|(v, len)| matrix(len, &|t| encode_words(t, v, len))),
        labels: dataset.labels(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_five_classes_in_first_appearance_order() {
        let mut text = String::from("text,label\n");
        for i in 0..10 {
            text += &format!("\"hello, row {i}\",c{}\n", (7 + i) % 5);
        }
        let d = read_labeled_csv(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.classes, ["c2", "c3", "c4", "c0", "c1"]);
        assert_eq!(d.examples[0].text, "hello, row 0");
        assert_eq!(d.examples[0].label, 0);
    }

    #[test]
    fn wrong_class_count_and_schema() {
        let three = "text,label\na,x\nb,y\nc,z\n";
        assert!(matches!(
            read_labeled_csv(three.as_bytes()),
            Err(Error::Dataset(_))
        ));
        assert!(matches!(
            read_labeled_csv("body,label\na,x\n".as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn batches() {
        let mut rng = RngStream::new(1);
        let b = batch_iterator(300, 128, false, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [128, 128, 44]);
        assert_eq!(b[0][..3], [0, 1, 2]);
        let again = batch_iterator(300, 128, true, &mut RngStream::new(9)).unwrap();
        assert_eq!(
            again,
            batch_iterator(300, 128, true, &mut RngStream::new(9)).unwrap()
        );
        assert!(batch_iterator(3, 0, false, &mut rng).is_err());
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let (train, val) = stratified_split(&labels, 0.2, &mut RngStream::new(4)).unwrap();
        assert_eq!((train.len(), val.len()), (80, 20));
        for c in 0..5 {
            assert_eq!(val.iter().filter(|&&i| labels[i] == c).count(), 4);
        }
    }
}
