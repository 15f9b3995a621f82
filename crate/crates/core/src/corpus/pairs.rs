use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{length_compatible_with, score_categories, PreparedRecord, Rounding, TextPair};
use crate::{rng, Error, Result, NUM_SCORES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGenConfig {
    pub target_per_class: usize,
    /// Maximum number of draws before giving up; `None` allows
    /// 1000 draws per requested pair.
    pub max_draws: Option<u64>,
    pub rounding: Rounding,
}

impl PairGenConfig {
    pub fn new(target_per_class: usize) -> Self {
        PairGenConfig {
            target_per_class,
            max_draws: None,
            rounding: Rounding::default(),
        }
    }
}

/// Rejection sampling of balanced pairs: draw two distinct records
/// uniformly, skip repeats, length-incompatible pairs and pairs whose score
/// class is already full, until every class holds `target_per_class` pairs.
pub fn generate_pairs(records: &[PreparedRecord], cfg: PairGenConfig, seed: u64) -> Result<Vec<TextPair>> {
    if records.len() < 2 {
        return Err(Error::Validation("pairing needs at least two records".into()));
    }
    if let Some(r) = records.iter().find(|r| r.tokens.is_empty()) {
        return Err(Error::Validation(format!("record {} has no tokens", r.id)));
    }
    let target = cfg.target_per_class;
    let budget = cfg
        .max_draws
        .unwrap_or_else(|| 1000 * (target as u64) * NUM_SCORES as u64);
    let mut r = rng::derived(seed, "pairs");
    let mut filled = [0usize; NUM_SCORES];
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Vec::with_capacity(target * NUM_SCORES);
    let mut draws = 0u64;
    while filled.iter().any(|&f| f < target) {
        if draws == budget {
            let class = (0..NUM_SCORES).find(|&c| filled[c] < target).unwrap();
            return Err(Error::BudgetExhausted {
                class: class as u8,
                filled: filled[class],
                target,
                draws,
            });
        }
        draws += 1;
        let i = r.random_range(0..records.len());
        let j = r.random_range(0..records.len());
        if i == j {
            continue;
        }
        let (a, b) = (&records[i], &records[j]);
        if !length_compatible_with(a.tokens.len(), b.tokens.len(), cfg.rounding)? {
            continue;
        }
        let score = score_categories(&a.cat, &b.cat);
        if filled[score as usize] >= target {
            continue;
        }
        if !seen.insert((i.min(j), i.max(j))) {
            continue;
        }
        filled[score as usize] += 1;
        out.push(TextPair {
            tokens_a: a.tokens.clone(),
            tokens_b: b.tokens.clone(),
            score,
            id_a: a.id.clone(),
            id_b: b.id.clone(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, CategoryTriple, SynthSpec};
    use crate::textproc::Preprocessor;

    fn prepared(seed: u64) -> Vec<PreparedRecord> {
        let spec = SynthSpec {
            records_per_leaf: 60,
            ..SynthSpec::default()
        };
        let corpus = synth_corpus(&spec, seed).unwrap();
        crate::corpus::prepare_records(&corpus.records, &Preprocessor::persian_default())
    }

    #[test]
    fn balanced_and_rechecked() {
        let recs = prepared(1);
        let by_id: std::collections::HashMap<_, _> = recs.iter().map(|r| (r.id.clone(), r)).collect();
        let pairs = generate_pairs(&recs, PairGenConfig::new(150), 9).unwrap();
        assert_eq!(pairs.len(), 600);
        let mut hist = [0; 4];
        let mut unordered = HashSet::new();
        for p in &pairs {
            hist[p.score as usize] += 1;
            assert_ne!(p.id_a, p.id_b);
            assert!(unordered.insert(if p.id_a < p.id_b {
                (p.id_a.clone(), p.id_b.clone())
            } else {
                (p.id_b.clone(), p.id_a.clone())
            }));
            let (la, lb) = (p.tokens_a.len() as i64, p.tokens_b.len() as i64);
            let threshold = ((15 * la.min(lb)) as f64 / 100.0).round() as i64;
            assert!((la - lb).abs() <= threshold);
            let (a, b) = (by_id[&p.id_a], by_id[&p.id_b]);
            assert_eq!(a.tokens, p.tokens_a);
            let want = match (a.cat.cat1 == b.cat.cat1, a.cat.cat2 == b.cat.cat2, a.cat.cat3 == b.cat.cat3) {
                (false, ..) => 0,
                (true, false, _) => 1,
                (true, true, false) => 2,
                _ => 3,
            };
            assert_eq!(p.score, want);
        }
        assert_eq!(hist, [150; 4]);
    }

    #[test]
    fn seeded_determinism() {
        let recs = prepared(2);
        let a = generate_pairs(&recs, PairGenConfig::new(50), 3).unwrap();
        let b = generate_pairs(&recs, PairGenConfig::new(50), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_pairs(&recs, PairGenConfig::new(50), 4).unwrap());
    }

    #[test]
    fn unfillable_class_reports_budget() {
        // Every record shares cat1, so score 0 can never be filled.
        let recs: Vec<PreparedRecord> = (0..20)
            .map(|i| PreparedRecord {
                id: i.to_string(),
                tokens: vec!["w".into(); 5],
                cat: CategoryTriple::new("a", if i % 2 == 0 { "b" } else { "c" }, format!("{}", i % 4)).unwrap(),
            })
            .collect();
        let cfg = PairGenConfig {
            max_draws: Some(5000),
            ..PairGenConfig::new(3)
        };
        match generate_pairs(&recs, cfg, 0) {
            Err(Error::BudgetExhausted { class, filled, .. }) => {
                assert_eq!(class, 0);
                assert_eq!(filled, 0);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
