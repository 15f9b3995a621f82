//! Synthetic stand-in for a categorized ad corpus.
//!
//! Every node of the category tree owns a pool of invented words. A record
//! draws most of its words from its leaf pool and the rest from its cat2
//! pool, its cat1 pool and a global pool, so texts under the same leaf
//! overlap more than texts under different cat1 branches. The raw text is
//! then roughened with stop words, `*`/`.` separators and Arabic letter
//! forms, all of which preprocessing removes again.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdRecord, CategoryTriple};
use crate::rng::{self, Rng as StdRng};
use crate::textproc::{normalize, NormalizationTable, StopWordList};
use crate::{Error, Result};

const LETTERS: &[char] = &[
    'ا', 'ب', 'پ', 'ت', 'ث', 'ج', 'چ', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'ژ', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ',
    'ف', 'ق', 'ک', 'گ', 'ل', 'م', 'ن', 'و', 'ه', 'ی',
];

/// Relative weights of the word pools a record samples from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenMix {
    pub leaf: f64,
    pub cat2: f64,
    pub cat1: f64,
    pub shared: f64,
}

impl Default for TokenMix {
    fn default() -> Self {
        TokenMix {
            leaf: 0.5,
            cat2: 0.2,
            cat1: 0.15,
            shared: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_cat1: usize,
    pub n_cat2_per: usize,
    pub n_cat3_per: usize,
    /// Words owned by each leaf.
    pub vocab_per_leaf: usize,
    /// Words shared by every record regardless of category.
    pub shared_vocab: usize,
    /// Words owned by each cat1 node and by each cat2 node.
    pub branch_vocab: usize,
    pub records_per_leaf: usize,
    /// When set, this many records are dealt round-robin over the leaves
    /// instead of `records_per_leaf` each.
    pub total_records: Option<usize>,
    /// Inclusive range of content words per record.
    pub len_range: (usize, usize),
    pub mix: TokenMix,
    /// Probability of inserting a stop word before a content word.
    pub stopword_rate: f64,
    /// Probability that a separator is `*` or `.` instead of a space.
    pub symbol_rate: f64,
    /// Probability that a word is written with Arabic yeh/kaf forms.
    pub arabic_form_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_cat1: 2,
            n_cat2_per: 2,
            n_cat3_per: 3,
            vocab_per_leaf: 30,
            shared_vocab: 40,
            branch_vocab: 20,
            records_per_leaf: 100,
            total_records: None,
            len_range: (6, 24),
            mix: TokenMix::default(),
            stopword_rate: 0.12,
            symbol_rate: 0.08,
            arabic_form_rate: 0.25,
        }
    }
}

impl SynthSpec {
    pub fn n_leaves(&self) -> usize {
        self.n_cat1 * self.n_cat2_per * self.n_cat3_per
    }

    fn validate(&self) -> Result<()> {
        let counts = [
            ("n_cat1", self.n_cat1),
            ("n_cat2_per", self.n_cat2_per),
            ("n_cat3_per", self.n_cat3_per),
            ("vocab_per_leaf", self.vocab_per_leaf),
            ("records_per_leaf", self.records_per_leaf),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.vocab_per_leaf < 2 {
            return Err(Error::Config("vocab_per_leaf must be at least 2".into()));
        }
        let m = self.mix;
        if [m.leaf, m.cat2, m.cat1, m.shared].iter().any(|w| !(*w >= 0.0)) || m.leaf <= 0.0 {
            return Err(Error::Config("mix weights must be non-negative with a positive leaf share".into()));
        }
        if (m.cat1 > 0.0 || m.cat2 > 0.0) && self.branch_vocab == 0 {
            return Err(Error::Config("branch_vocab is 0 but the mix draws from branch pools".into()));
        }
        if m.shared > 0.0 && self.shared_vocab == 0 {
            return Err(Error::Config("shared_vocab is 0 but the mix draws from it".into()));
        }
        let (lo, hi) = self.len_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid len_range {:?}", self.len_range)));
        }
        for (name, p) in [
            ("stopword_rate", self.stopword_rate),
            ("symbol_rate", self.symbol_rate),
            ("arabic_form_rate", self.arabic_form_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The invented word pools behind a synthetic corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynthVocab {
    pub leaf: BTreeMap<CategoryTriple, Vec<String>>,
    pub cat2: BTreeMap<(String, String), Vec<String>>,
    pub cat1: BTreeMap<String, Vec<String>>,
    pub shared: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<AdRecord>,
    pub leaves: Vec<CategoryTriple>,
    pub vocab: SynthVocab,
}

struct WordFactory<'a> {
    used: HashSet<String>,
    table: &'a NormalizationTable,
    stops: &'a StopWordList,
}

impl WordFactory<'_> {
    fn fresh(&mut self, r: &mut StdRng) -> String {
        loop {
            let len = r.random_range(3..=6);
            let w: String = (0..len).map(|_| LETTERS[r.random_range(0..LETTERS.len())]).collect();
            if normalize(&w, self.table) == w && !self.stops.contains(&w) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn pool(&mut self, n: usize, r: &mut StdRng) -> Vec<String> {
        (0..n).map(|_| self.fresh(r)).collect()
    }
}

fn arabic_forms(word: &str) -> String {
    word.chars()
        .map(|c| match c {
            'ی' => 'ي',
            'ک' => 'ك',
            other => other,
        })
        .collect()
}

pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus> {
    spec.validate()?;
    let table = NormalizationTable::persian_default();
    let stops = StopWordList::persian_default(&table);
    let noise_words = stops.truncated(15);
    let mut r = rng::derived(seed, "synth");
    let mut words = WordFactory {
        used: HashSet::new(),
        table: &table,
        stops: &stops,
    };

    let mut vocab = SynthVocab {
        shared: words.pool(spec.shared_vocab, &mut r),
        ..SynthVocab::default()
    };
    let mut leaves = Vec::with_capacity(spec.n_leaves());
    for i in 0..spec.n_cat1 {
        let c1 = format!("c{i}");
        vocab.cat1.insert(c1.clone(), words.pool(spec.branch_vocab, &mut r));
        for j in 0..spec.n_cat2_per {
            let c2 = format!("c{i}-{j}");
            vocab.cat2.insert((c1.clone(), c2.clone()), words.pool(spec.branch_vocab, &mut r));
            for k in 0..spec.n_cat3_per {
                let leaf = CategoryTriple::new(c1.clone(), c2.clone(), format!("c{i}-{j}-{k}"))?;
                vocab.leaf.insert(leaf.clone(), words.pool(spec.vocab_per_leaf, &mut r));
                leaves.push(leaf);
            }
        }
    }

    let n_records = spec.total_records.unwrap_or(spec.records_per_leaf * leaves.len());
    let m = spec.mix;
    let total_weight = m.leaf + m.cat2 + m.cat1 + m.shared;
    let mut records = Vec::with_capacity(n_records);
    for idx in 0..n_records {
        let leaf = &leaves[idx % leaves.len()];
        let pools: [(&[String], f64); 4] = [
            (&vocab.leaf[leaf], m.leaf),
            (&vocab.cat2[&(leaf.cat1.clone(), leaf.cat2.clone())], m.cat2),
            (&vocab.cat1[&leaf.cat1], m.cat1),
            (&vocab.shared, m.shared),
        ];
        let n = r.random_range(spec.len_range.0..=spec.len_range.1);
        let mut content = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u = r.random_range(0.0..total_weight);
            let pool = pools
                .iter()
                .find(|(_, w)| {
                    let hit = u < *w;
                    u -= w;
                    hit
                })
                .map_or(pools[0].0, |(p, _)| *p);
            content.push(pool[r.random_range(0..pool.len())].clone());
        }
        let title_len = r.random_range(1..=n.min(3));
        let mut render = |toks: &[String]| -> String {
            let mut s = String::new();
            for (t, w) in toks.iter().enumerate() {
                if t > 0 {
                    let roll: f64 = r.random();
                    s.push_str(if roll < spec.symbol_rate / 2.0 {
                        "*"
                    } else if roll < spec.symbol_rate {
                        "."
                    } else {
                        " "
                    });
                }
                if r.random_bool(spec.stopword_rate) {
                    s.push_str(&noise_words.words()[r.random_range(0..noise_words.len())]);
                    s.push(' ');
                }
                if r.random_bool(spec.arabic_form_rate) {
                    s.push_str(&arabic_forms(w));
                } else {
                    s.push_str(w);
                }
            }
            s
        };
        let title = render(&content[..title_len]);
        let desc = render(&content[title_len..]);
        records.push(AdRecord {
            id: format!("synth-{idx:06}"),
            title,
            desc,
            cat: leaf.clone(),
            extra: BTreeMap::new(),
        });
    }
    Ok(SynthCorpus {
        records,
        leaves,
        vocab,
    })
}
