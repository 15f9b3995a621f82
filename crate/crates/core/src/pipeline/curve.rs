use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate, fit, EpochRecord, Metrics, TrainConfig};
use crate::corpus::{DatasetSplit, TextPair};
use crate::embedding::{EmbeddingMatrix, Vocabulary};
use crate::encoder::EncoderRegistry;
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    pub size: usize,
    pub encoder: String,
    pub metrics: Metrics,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub sizes: Vec<usize>,
    pub encoders: Vec<String>,
    /// Size-major: all encoders for the first size, then the next size.
    pub cells: Vec<CurveCell>,
}

impl LearningCurve {
    pub fn cell(&self, size: usize, encoder: &str) -> Option<&CurveCell> {
        self.cells.iter().find(|c| c.size == size && c.encoder == encoder)
    }

    /// Test weighted F1 of one encoder, in size order.
    pub fn weighted_f1(&self, encoder: &str) -> Vec<f64> {
        self.sizes
            .iter()
            .filter_map(|&s| self.cell(s, encoder).map(|c| c.metrics.weighted_f1))
            .collect()
    }

    /// One row per size, an F1 and an accuracy column per encoder.
    pub fn table(&self) -> String {
        let mut header = vec!["Training Sample Number".to_owned()];
        for e in &self.encoders {
            let name = super::display_name(e);
            header.push(format!("{name} F1 Score"));
            header.push(format!("{name} Accuracy"));
        }
        let mut rows = vec![header];
        for &size in &self.sizes {
            let mut row = vec![size_label(size)];
            for e in &self.encoders {
                match self.cell(size, e) {
                    Some(c) => {
                        row.push(format!("{:.4}", c.metrics.weighted_f1));
                        row.push(format!("{:.4}", c.metrics.accuracy));
                    }
                    None => row.extend(["-".to_owned(), "-".to_owned()]),
                }
            }
            rows.push(row);
        }
        super::report::align(&rows)
    }
}

/// `2000` as `2k`, `16000000` as `16m`; other counts verbatim.
pub fn size_label(n: usize) -> String {
    let mut out = String::new();
    if n >= 1_000_000 && n % 1_000_000 == 0 {
        write!(out, "{}m", n / 1_000_000).unwrap();
    } else if n >= 1000 && n % 1000 == 0 {
        write!(out, "{}k", n / 1000).unwrap();
    } else {
        write!(out, "{n}").unwrap();
    }
    out
}

/// Trains every config on nested training subsets (each size is a prefix
/// of one seeded shuffle of `split.train`) and evaluates on `split.test`.
pub fn learning_curve(
    sizes: &[usize],
    configs: &[TrainConfig],
    split: &DatasetSplit<TextPair>,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<LearningCurve> {
    if sizes.is_empty() || configs.is_empty() {
        return Err(Error::Validation("need at least one size and one encoder".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Validation(format!("sizes must be positive and strictly ascending: {sizes:?}")));
    }
    let largest = *sizes.last().expect("nonempty");
    if largest > split.train.len() {
        return Err(Error::Validation(format!(
            "largest size {largest} exceeds the {} training pairs",
            split.train.len()
        )));
    }
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    order.shuffle(&mut rng::derived(seed, "curve"));
    let registry = EncoderRegistry::builtin();
    let mut cells = Vec::new();
    for &size in sizes {
        let subset: Vec<TextPair> = order[..size].iter().map(|&i| split.train[i].clone()).collect();
        for cfg in configs {
            let out = fit(&registry, &subset, &split.validation, emb, vocab, cfg)?;
            let eval = evaluate(&out.checkpoint.model, &split.test)?;
            cells.push(CurveCell {
                size,
                encoder: cfg.encoder.kind.clone(),
                metrics: eval.metrics,
                history: out.history,
            });
        }
    }
    Ok(LearningCurve {
        sizes: sizes.to_vec(),
        encoders: configs.iter().map(|c| c.encoder.kind.clone()).collect(),
        cells,
    })
}
