//! Vocabulary construction, CBOW word vectors and the plain-text vector
//! file format.

mod cbow;
mod io;

pub use cbow::{train_cbow, CbowConfig, CbowOutcome};
pub use io::{load_embeddings, parse_embeddings, save_embeddings, write_embeddings};

use std::collections::HashMap;

use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// A vocabulary in the given order. Counts are unknown and recorded as 0.
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let counts = vec![0; words.len()];
        Vocabulary::with_counts(words, counts, 0)
    }

    pub fn with_counts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::Validation("one count per word required".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!("invalid vocabulary word {w:?}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }
}

/// Counts tokens over all streams and keeps words seen at least
/// `min_count` times. Ids follow descending count, ties in lexicographic
/// order.
pub fn build_vocab<S: AsRef<[String]>>(streams: &[S], min_count: u64) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::Validation("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in streams {
        for t in s.as_ref() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (words, counts) = kept.into_iter().map(|(w, c)| (w.to_owned(), c)).unzip();
    Vocabulary::with_counts(words, counts, min_count)
}

/// Maps known tokens to ids and drops out-of-vocabulary ones. An empty
/// result means nothing in `tokens` has a vector.
pub fn lookup_ids(tokens: &[String], vocab: &Vocabulary) -> Vec<usize> {
    tokens.iter().filter_map(|t| vocab.id(t)).collect()
}

/// Word vectors (input side) plus the CBOW output-side table.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    vectors: Vec<f64>,
    context: Vec<f64>,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, vectors: Vec<f64>, context: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        if vectors.len() != rows * dim || context.as_ref().is_some_and(|c| c.len() != rows * dim) {
            return Err(Error::Shape(format!("embedding table is not {rows}x{dim}")));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingMatrix {
            rows,
            dim,
            context: context.unwrap_or_else(|| vec![0.0; vectors.len()]),
            vectors,
            trainable: true,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn context_vectors(&self) -> &[f64] {
        &self.context
    }

    /// Input vectors as a `rows x dim` tensor.
    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(vec![self.rows, self.dim], self.vectors.clone())
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.vector(a), self.vector(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn min_count_filters_rare_words() {
        let v = build_vocab(&[s(&["a", "a", "b"])], 2).unwrap();
        assert_eq!(v.words(), &s(&["a"])[..]);
        assert_eq!(v.counts(), &[2]);
        let all = build_vocab(&[s(&["a", "a", "b"])], 1).unwrap();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn ids_follow_count_then_lexicographic_order() {
        let v = build_vocab(&[s(&["z", "y", "y", "x", "x"]), s(&["w"])], 1).unwrap();
        assert_eq!(v.words(), &s(&["x", "y", "w", "z"])[..]);
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), Some(i));
        }
    }

    #[test]
    fn chunking_does_not_change_vocabulary() {
        let one = vec![s(&["a", "b", "a", "c", "b", "a"])];
        let split = vec![s(&["a", "b"]), s(&["a", "c"]), s(&["b", "a"])];
        assert_eq!(build_vocab(&one, 1).unwrap(), build_vocab(&split, 1).unwrap());
    }

    #[test]
    fn empty_corpus_and_bad_min_count() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(build_vocab(&empty, 2).unwrap().is_empty());
        assert!(build_vocab(&empty, 0).is_err());
    }

    #[test]
    fn lookup_drops_unknown_tokens() {
        let v = Vocabulary::from_words(s(&["known", "known2"])).unwrap();
        assert_eq!(lookup_ids(&s(&["known", "UNSEEN", "known2"]), &v), vec![0, 1]);
        assert_eq!(lookup_ids(&s(&["known2", "known"]), &v), vec![1, 0]);
        assert!(lookup_ids(&[], &v).is_empty());
        assert!(lookup_ids(&s(&["nope"]), &v).is_empty());
    }

    #[test]
    fn matrix_validation() {
        assert!(EmbeddingMatrix::new(2, 3, vec![0.0; 5], None).is_err());
        assert!(EmbeddingMatrix::new(1, 2, vec![0.0, f64::NAN], None).is_err());
        let m = EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 2.0], None).unwrap();
        assert_eq!(m.cosine(0, 1), 0.0);
        assert_eq!(m.cosine(1, 1), 1.0);
    }
}
