//! Categorized records, category-overlap scoring, length-matched pairing,
//! dataset splits and a synthetic record generator.

mod io;
mod pairs;
mod split;
mod synth;

pub use io::{read_jsonl, read_records, write_jsonl, write_records};
pub use pairs::{generate_pairs, PairGenConfig};
pub use split::{split_dataset, split_sizes, DatasetSplit};
pub use synth::{synth_corpus, SynthCorpus, SynthSpec, SynthVocab, TokenMix};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::textproc::Preprocessor;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CategoryTriple {
    pub cat1: String,
    pub cat2: String,
    pub cat3: String,
}

impl CategoryTriple {
    pub fn new(cat1: impl Into<String>, cat2: impl Into<String>, cat3: impl Into<String>) -> Result<Self> {
        let t = CategoryTriple {
            cat1: cat1.into(),
            cat2: cat2.into(),
            cat3: cat3.into(),
        };
        if t.cat1.is_empty() || t.cat2.is_empty() || t.cat3.is_empty() {
            return Err(Error::Validation(format!("category levels must be non-empty: {t:?}")));
        }
        Ok(t)
    }

    pub fn levels(&self) -> [&str; 3] {
        [&self.cat1, &self.cat2, &self.cat3]
    }
}

/// One categorized advertisement.
#[derive(Clone, Debug, PartialEq)]
pub struct AdRecord {
    pub id: String,
    pub title: String,
    pub desc: String,
    pub cat: CategoryTriple,
    /// Attributes carried through untouched.
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Two token sequences and their category-overlap score.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub tokens_a: Vec<String>,
    pub tokens_b: Vec<String>,
    pub score: u8,
    pub id_a: String,
    pub id_b: String,
}

impl TextPair {
    pub fn swapped(&self) -> TextPair {
        TextPair {
            tokens_a: self.tokens_b.clone(),
            tokens_b: self.tokens_a.clone(),
            score: self.score,
            id_a: self.id_b.clone(),
            id_b: self.id_a.clone(),
        }
    }
}

/// A record after joining and preprocessing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(flatten)]
    pub cat: CategoryTriple,
}

/// Title, one space, description. Empty parts are omitted; `None` when
/// both are empty.
pub fn join_title_desc(record: &AdRecord) -> Option<String> {
    let parts: Vec<&str> = [record.title.trim(), record.desc.trim()]
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        None
    } else {
        Some(parts.join(" "))
    }
}

/// Length of the longest matching prefix of `(cat1, cat2, cat3)`.
pub fn score_categories(a: &CategoryTriple, b: &CategoryTriple) -> u8 {
    a.levels()
        .iter()
        .zip(b.levels())
        .take_while(|(x, y)| **x == *y)
        .count() as u8
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    HalfAwayFromZero,
    Floor,
}

/// Largest allowed length difference for a pair whose shorter text has
/// `shorter` tokens: 15% of it, rounded.
pub fn length_tolerance(shorter: usize, rounding: Rounding) -> usize {
    let scaled = 15 * shorter;
    match rounding {
        Rounding::HalfAwayFromZero => (scaled + 50) / 100,
        Rounding::Floor => scaled / 100,
    }
}

pub fn length_compatible(la: usize, lb: usize) -> Result<bool> {
    length_compatible_with(la, lb, Rounding::default())
}

pub fn length_compatible_with(la: usize, lb: usize, rounding: Rounding) -> Result<bool> {
    if la == 0 || lb == 0 {
        return Err(Error::Validation("texts must hold at least one token".into()));
    }
    Ok(la.abs_diff(lb) <= length_tolerance(la.min(lb), rounding))
}

/// Joins and preprocesses records, dropping the ones left without tokens.
pub fn prepare_records(records: &[AdRecord], pre: &Preprocessor) -> Vec<PreparedRecord> {
    records
        .iter()
        .filter_map(|r| {
            let text = join_title_desc(r)?;
            let tokens = pre.run(&text);
            (!tokens.is_empty()).then(|| PreparedRecord {
                id: r.id.clone(),
                tokens,
                cat: r.cat.clone(),
            })
        })
        .collect()
}
