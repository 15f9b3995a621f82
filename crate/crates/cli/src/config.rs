//! Run configuration: an optional JSON file, overridden field by field by
//! command-line flags.

use std::path::{Path, PathBuf};

use pairsim::corpus::{PairGenConfig, Rounding, SynthSpec};
use pairsim::embedding::CbowConfig;
use pairsim::encoder::EncoderConfig;
use pairsim::pipeline::TrainConfig;
use pairsim::tensor::AdamConfig;
use pairsim::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "PAIRSIM_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub records: PathBuf,
    pub prepared: PathBuf,
    pub vocab: PathBuf,
    pub pairs: PathBuf,
    pub embeddings: PathBuf,
    pub checkpoint: PathBuf,
    pub reports: PathBuf,
    /// Replaces the built-in character table.
    pub normalization: Option<PathBuf>,
    /// Replaces the built-in stop-word list.
    pub stopwords: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            records: "records.jsonl".into(),
            prepared: "prepared.jsonl".into(),
            vocab: "vocab.tsv".into(),
            pairs: "pairs.jsonl".into(),
            embeddings: "embeddings.txt".into(),
            checkpoint: "model.ckpt".into(),
            reports: "reports".into(),
            normalization: None,
            stopwords: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_count: u64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let c = CbowConfig::default();
        EmbeddingSection {
            dim: c.dim,
            window: c.window,
            negatives: c.negatives,
            epochs: c.epochs,
            lr: c.lr,
            min_count: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSection {
    pub target_per_class: usize,
    pub rounding: Rounding,
    pub max_draws: Option<u64>,
}

impl Default for PairSection {
    fn default() -> Self {
        PairSection {
            target_per_class: 1000,
            rounding: Rounding::default(),
            max_draws: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub encoder: String,
    pub max_len: usize,
    /// LSTM state size; the embedding width when unset.
    pub hidden: Option<usize>,
    pub filter_width: usize,
    pub share_weights: bool,
    /// 20 for cnn and mean, 5 for lstm when unset.
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub fine_tune_embeddings: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::desk("cnn");
        TrainSection {
            encoder: t.encoder.kind,
            max_len: t.encoder.max_len,
            hidden: None,
            filter_width: t.encoder.filter_width,
            share_weights: t.encoder.share_weights,
            epochs: None,
            batch_size: t.batch_size,
            adam: t.adam,
            fine_tune_embeddings: t.fine_tune_embeddings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub sizes: Vec<usize>,
    pub encoders: Vec<String>,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            sizes: vec![2000, 8000, 32000],
            encoders: vec!["mean".into(), "cnn".into(), "lstm".into()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Flag, then this field, then `PAIRSIM_SEED`, then 0.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub synth: SynthSpec,
    pub embedding: EmbeddingSection,
    pub pairs: PairSection,
    pub train: TrainSection,
    pub curve: CurveSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    /// Fills in the seed from the environment when neither the flag nor the
    /// file set it.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            self.seed = Some(s);
        }
        if self.seed.is_none() {
            if let Ok(v) = std::env::var(SEED_ENV) {
                let s = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                self.seed = Some(s);
            }
        }
        Ok(*self.seed.get_or_insert(0))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn cbow(&self) -> CbowConfig {
        let e = &self.embedding;
        CbowConfig {
            dim: e.dim,
            window: e.window,
            negatives: e.negatives,
            epochs: e.epochs,
            lr: e.lr,
            seed: self.seed(),
        }
    }

    pub fn pair_gen(&self) -> PairGenConfig {
        PairGenConfig {
            target_per_class: self.pairs.target_per_class,
            max_draws: self.pairs.max_draws,
            rounding: self.pairs.rounding,
        }
    }

    /// Training settings for `kind` over word vectors of width `dim`.
    pub fn train_config(&self, kind: &str, dim: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            encoder: EncoderConfig {
                kind: kind.into(),
                max_len: t.max_len,
                dim,
                share_weights: t.share_weights,
                filter_width: t.filter_width,
                hidden: t.hidden.unwrap_or(dim),
            },
            epochs: t.epochs.unwrap_or_else(|| TrainConfig::default_epochs(kind)),
            batch_size: t.batch_size,
            adam: t.adam,
            seed: self.seed(),
            fine_tune_embeddings: t.fine_tune_embeddings,
        }
    }
}

/// `pairs.jsonl` becomes `pairs.train.jsonl` and so on.
pub fn part_path(pairs: &Path, part: &str) -> PathBuf {
    let stem = pairs.file_stem().and_then(|s| s.to_str()).unwrap_or("pairs");
    let ext = pairs.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    pairs.with_file_name(format!("{stem}.{part}.{ext}"))
}
