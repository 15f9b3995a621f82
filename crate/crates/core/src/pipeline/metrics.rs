use serde::{Deserialize, Serialize};

use crate::corpus::TextPair;
use crate::model::SimModel;
use crate::simhead::{predict_score, ScoreDistribution};
use crate::{Error, Result, NUM_SCORES};

/// Rows are true scores, columns predicted scores.
pub type Confusion = [[u64; NUM_SCORES]; NUM_SCORES];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class_f1: [f64; NUM_SCORES],
    pub precision: [f64; NUM_SCORES],
    pub recall: [f64; NUM_SCORES],
    pub support: [u64; NUM_SCORES],
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn total(&self) -> u64 {
        self.support.iter().sum()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_metrics(confusion: &Confusion) -> Result<Metrics> {
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Validation("confusion matrix is all zero".into()));
    }
    let mut m = Metrics {
        per_class_f1: [0.0; NUM_SCORES],
        precision: [0.0; NUM_SCORES],
        recall: [0.0; NUM_SCORES],
        support: [0; NUM_SCORES],
        weighted_f1: 0.0,
        accuracy: 0.0,
        confusion: *confusion,
    };
    let mut trace = 0;
    for c in 0..NUM_SCORES {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        trace += tp;
        let (p, r) = (ratio(tp, predicted), ratio(tp, support));
        m.precision[c] = p;
        m.recall[c] = r;
        m.support[c] = support;
        m.per_class_f1[c] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        m.weighted_f1 += support as f64 * m.per_class_f1[c];
    }
    m.weighted_f1 /= total as f64;
    m.accuracy = ratio(trace, total);
    Ok(m)
}

/// Metrics plus the number of pairs that could not be scored because a
/// side had no known word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub excluded: usize,
}

/// Distribution for every pair; `None` where a side has no known word.
pub fn predict_pairs(model: &SimModel, pairs: &[TextPair]) -> Result<Vec<Option<ScoreDistribution>>> {
    pairs
        .iter()
        .map(|p| model.predict_tokens(&p.tokens_a, &p.tokens_b))
        .collect()
}

pub fn evaluate(model: &SimModel, pairs: &[TextPair]) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::Validation("no pairs to evaluate".into()));
    }
    let mut confusion = [[0u64; NUM_SCORES]; NUM_SCORES];
    let mut excluded = 0;
    for (pair, dist) in pairs.iter().zip(predict_pairs(model, pairs)?) {
        let truth = pair.score as usize;
        if truth >= NUM_SCORES {
            return Err(Error::Validation(format!("pair score {truth} outside 0..{NUM_SCORES}")));
        }
        match dist {
            Some(d) => confusion[truth][predict_score(&d) as usize] += 1,
            None => excluded += 1,
        }
    }
    if excluded == pairs.len() {
        return Err(Error::Compatibility(format!(
            "none of {} pairs has a known word on both sides; wrong vocabulary?",
            pairs.len()
        )));
    }
    Ok(Evaluation {
        metrics: f1_metrics(&confusion)?,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn diagonal_is_perfect() {
        let mut c = [[0; 4]; 4];
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = 10 + i as u64;
        }
        let m = f1_metrics(&c).unwrap();
        assert_eq!(m.per_class_f1, [1.0; 4]);
        assert_eq!((m.weighted_f1, m.accuracy), (1.0, 1.0));
    }

    #[test]
    fn two_class_hand_case() {
        let mut c = [[0; 4]; 4];
        c[0] = [5, 5, 0, 0];
        c[1] = [0, 10, 0, 0];
        let m = f1_metrics(&c).unwrap();
        assert!((m.per_class_f1[0] - 2.0 / 3.0).abs() < 1e-15);
        // Class 1: precision 10/15, recall 1.
        assert!((m.per_class_f1[1] - 0.8).abs() < 1e-15);
        assert_eq!(m.per_class_f1[2], 0.0);
        assert!((m.accuracy - 0.75).abs() < 1e-15);
        assert!((m.weighted_f1 - (10.0 * 2.0 / 3.0 + 10.0 * 0.8) / 20.0).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor_on_balanced_labels() {
        let c = [[25, 0, 0, 0]; 4];
        let m = f1_metrics(&c).unwrap();
        assert_eq!(m.accuracy, 0.25);
        assert_eq!(m.total(), 100);
    }

    #[test]
    fn all_zero_is_rejected() {
        assert!(matches!(f1_metrics(&[[0; 4]; 4]), Err(Error::Validation(_))));
    }

    /// Independent formulation: per-class counts of true/false positives and
    /// false negatives, F1 = 2tp / (2tp + fp + fn).
    #[test]
    fn agrees_with_count_based_formula() {
        let mut r = crate::rng::seeded(99);
        for _ in 0..100 {
            let mut c = [[0u64; 4]; 4];
            for row in c.iter_mut() {
                for v in row.iter_mut() {
                    *v = if r.random_bool(0.2) { 0 } else { r.random_range(0..50) };
                }
            }
            c[0][0] += 1;
            let m = f1_metrics(&c).unwrap();
            let n: u64 = c.iter().flatten().sum();
            let mut weighted = 0.0;
            for k in 0..4 {
                let tp = c[k][k] as f64;
                let fp: f64 = (0..4).filter(|&i| i != k).map(|i| c[i][k] as f64).sum();
                let fn_: f64 = (0..4).filter(|&j| j != k).map(|j| c[k][j] as f64).sum();
                let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
                assert!((m.per_class_f1[k] - f1).abs() <= 1e-12);
                weighted += (tp + fn_) * f1;
            }
            assert!((m.weighted_f1 - weighted / n as f64).abs() <= 1e-12);
            let acc = (0..4).map(|k| c[k][k]).sum::<u64>() as f64 / n as f64;
            assert!((m.accuracy - acc).abs() <= 1e-12);
        }
    }
}
