//! Supervised training, evaluation, checkpoints and the learning-curve
//! harness.

mod checkpoint;
mod curve;
mod gradsuite;
mod metrics;
mod report;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use curve::{learning_curve, size_label, CurveCell, LearningCurve};
pub use gradsuite::{gradient_suite, GradSuiteConfig};
pub use metrics::{evaluate, f1_metrics, predict_pairs, Confusion, Evaluation, Metrics};
pub use report::{config_digest, display_name, results_table, MetricsReport};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, TextPair};
use crate::embedding::{EmbeddingMatrix, Vocabulary};
use crate::encoder::{EncoderConfig, EncoderRegistry};
use crate::model::SimModel;
use crate::tensor::{AdamConfig, AdamState, Tensor};
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Update the word vectors along with the network.
    pub fine_tune_embeddings: bool,
}

impl TrainConfig {
    /// Epoch budget used for each encoder at full scale.
    pub fn default_epochs(kind: &str) -> usize {
        if kind == "lstm" {
            5
        } else {
            20
        }
    }

    /// Full-scale settings: batch 1000, 20 epochs (5 for the LSTM).
    pub fn full_scale(kind: &str) -> Self {
        TrainConfig {
            encoder: EncoderConfig {
                kind: kind.into(),
                ..EncoderConfig::default()
            },
            epochs: Self::default_epochs(kind),
            batch_size: 1000,
            adam: AdamConfig::default(),
            seed: 0,
            fine_tune_embeddings: true,
        }
    }

    /// Same as [`TrainConfig::full_scale`] with batch 64, which suits the small
    /// synthetic sets.
    pub fn desk(kind: &str) -> Self {
        TrainConfig {
            batch_size: 64,
            ..Self::full_scale(kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.adam.lr)));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::full_scale("cnn")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training pairs.
    pub train_loss: f64,
    pub validation_weighted_f1: f64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    /// Training pairs left out because a side had no known word.
    pub skipped: usize,
}

struct Example {
    a: Vec<usize>,
    b: Vec<usize>,
    score: u8,
}

pub fn train_model(
    split: &DatasetSplit<TextPair>,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    fit(&EncoderRegistry::builtin(), &split.train, &split.validation, emb, vocab, cfg)
}

/// Minibatch Adam on the cross-entropy of `train`, scored on `validation`
/// after every epoch. Returns the final-epoch parameters.
pub fn fit(
    registry: &EncoderRegistry,
    train: &[TextPair],
    validation: &[TextPair],
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Validation("training and validation sets must be nonempty".into()));
    }
    let mut model = SimModel::new(registry, cfg.encoder.clone(), vocab.clone(), emb, cfg.seed)?;
    let examples: Vec<Example> = train
        .iter()
        .map(|p| Example {
            a: model.ids(&p.tokens_a),
            b: model.ids(&p.tokens_b),
            score: p.score,
        })
        .filter(|e| !e.a.is_empty() && !e.b.is_empty())
        .collect();
    let skipped = train.len() - examples.len();
    if examples.is_empty() {
        return Err(Error::Compatibility("no training pair has known words on both sides".into()));
    }

    // Frozen word vectors are left out of the optimizer entirely.
    let first = usize::from(!cfg.fine_tune_embeddings);
    let mut adam = AdamState::new(cfg.adam, &model.params()[first..].iter().collect::<Vec<_>>());
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffler = rng::derived(cfg.seed, "epochs");
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffler);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| g.data_mut().fill(0.0));
            let mut batch_loss = 0.0;
            for &i in batch {
                let e = &examples[i];
                batch_loss += model.accumulate(&e.a, &e.b, e.score, cfg.fine_tune_embeddings, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b + 1 });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.data_mut().iter_mut().for_each(|v| *v *= scale));
            let grad_refs: Vec<&Tensor> = grads[first..].iter().collect();
            let mut params: Vec<&mut Tensor> = model.params_mut()[first..].iter_mut().collect();
            adam.step(&mut params, &grad_refs)?;
        }
        let val = evaluate(&model, validation)?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / examples.len() as f64,
            validation_weighted_f1: val.metrics.weighted_f1,
        });
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            train: cfg.clone(),
            model,
            config_digest: None,
        },
        history,
        skipped,
    })
}
