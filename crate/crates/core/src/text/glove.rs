use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::vocab::{Vocabulary, OOV_ID, PAD_ID};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const GLOVE_DIM: usize = 100;

/// Pretrained table aligned with a vocabulary, plus lookup coverage.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub table: Tensor<f64>,
    /// Vocabulary tokens (pad and OOV excluded) found in the file.
    pub hits: usize,
    pub misses: usize,
}

impl EmbeddingMatrix {
    pub fn coverage(&self) -> f64 {
        let n = self.hits + self.misses;
        if n == 0 {
            0.0
        } else {
            self.hits as f64 / n as f64
        }
    }

    /// Table extended with zero rows to `rows`.
    pub fn padded_to(&self, rows: usize) -> Result<Tensor<f64>> {
        let [have, dim] = *self.table.shape() else {
            unreachable!("embedding tables are rank 2")
        };
        if rows < have {
            return Err(Error::Build(format!(
                "embedding table has {have} rows, model vocabulary only {rows}"
            )));
        }
        let mut data = self.table.data().to_vec();
        data.resize(rows * dim, 0.0);
        Tensor::from_vec(&[rows, dim], data)
    }
}

/// Reads a whitespace-separated `token v1 .. v{dim}` file. Rows of
/// vocabulary tokens missing from the file, and the pad and OOV rows, stay
/// zero. Every line must carry exactly `dim` values.
pub fn load_glove_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_glove_embeddings(file, path, vocab, dim)
}

pub fn read_glove_embeddings(
    reader: impl Read,
    origin: &Path,
    vocab: &Vocabulary,
    dim: usize,
) -> Result<EmbeddingMatrix> {
    let mut data = vec![0.0f64; vocab.len() * dim];
    let mut seen = vec![false; vocab.len()];
    let parse_error = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(parse_error(
                lineno,
                format!(
                    "expected {dim} values after `{token}`, found {}",
                    values.len()
                ),
            ));
        }
        let Some(id) = vocab.get(token) else {
            continue;
        };
        if id == PAD_ID || id == OOV_ID || seen[id as usize] {
            continue;
        }
        let row = &mut data[id as usize * dim..(id as usize + 1) * dim];
        for (slot, v) in row.iter_mut().zip(&values) {
            *slot = v
                .parse()
                .map_err(|_| parse_error(lineno, format!("`{v}` is not a number")))?;
        }
        seen[id as usize] = true;
    }
    let real = vocab.len().saturating_sub(2);
    let hits = seen.iter().filter(|&&s| s).count();
    Ok(EmbeddingMatrix {
        table: Tensor::from_vec(&[vocab.len(), dim], data)?,
        hits,
        misses: real - hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::build_word_vocab;

    fn load(text: &str, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingMatrix> {
        read_glove_embeddings(text.as_bytes(), Path::new("glove.txt"), vocab, dim)
    }

    #[test]
    fn coverage_and_zero_rows() {
        let vocab = build_word_vocab(["cat dog eel"], 10).unwrap();
        let m = load("cat 1 2\n<pad> 9 9\nfox 3 4\ndog 5 6\n", &vocab, 2).unwrap();
        assert_eq!((m.hits, m.misses), (2, 1));
        assert!((m.coverage() - 2.0 / 3.0).abs() < 1e-12);
        let row = |t: &str| {
            let id = vocab.id(t) as usize;
            m.table.data()[id * 2..id * 2 + 2].to_vec()
        };
        assert_eq!(row("cat"), [1.0, 2.0]);
        assert_eq!(row("eel"), [0.0, 0.0]);
        assert_eq!(m.table.data()[..4], [0.0; 4]);
    }

    #[test]
    fn short_line_names_its_number() {
        let vocab = build_word_vocab(["cat"], 10).unwrap();
        let err = load("cat 1 2 3\nbad 1 2\n", &vocab, 3).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let vocab = build_word_vocab(["cat"], 10).unwrap();
        let err = load_glove_embeddings(Path::new("/nonexistent/glove.txt"), &vocab, 100);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn padding_rows() {
        let vocab = build_word_vocab(["cat"], 10).unwrap();
        let m = load("cat 1 2\n", &vocab, 2).unwrap();
        let t = m.padded_to(5).unwrap();
        assert_eq!(t.shape(), [5, 2]);
        assert!(m.padded_to(2).is_err());
    }
}
