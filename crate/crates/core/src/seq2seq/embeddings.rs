//! Pre-trained word vectors in the plain `word v1 ... vE` text format.

use std::collections::HashMap;
use std::io::BufRead;

use super::{S2SError, Vocab};

#[derive(Debug, Clone, Default)]
pub struct Embeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl Embeddings {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Reads vectors, keeping only words in `vocab` when one is given (under the
/// vocabulary's case folding). A leading `count dim` header line is skipped.
/// The first vector seen for a word wins.
pub fn read_embeddings(reader: impl BufRead, vocab: Option<&Vocab>) -> Result<Embeddings, S2SError> {
    let mut out = Embeddings::default();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        if no == 0 && rest.len() == 1 && word.parse::<u64>().is_ok() && rest[0].parse::<u64>().is_ok() {
            continue;
        }
        let err = |message: String| S2SError::Format { line: no + 1, message };
        if rest.is_empty() {
            return Err(err(format!("no vector for {word:?}")));
        }
        if out.dim == 0 {
            out.dim = rest.len();
        } else if rest.len() != out.dim {
            return Err(err(format!("{} values, expected {}", rest.len(), out.dim)));
        }
        let key = match vocab {
            Some(v) if v.lowercases() => word.to_lowercase(),
            _ => word.to_string(),
        };
        if vocab.is_some_and(|v| v.id(&key) == 0 && v.words()[0] != key) || out.vectors.contains_key(&key) {
            continue;
        }
        let values = rest
            .iter()
            .map(|s| s.parse::<f32>().map_err(|e| err(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.vectors.insert(key, values);
    }
    Ok(out)
}
