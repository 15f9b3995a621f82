use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{lookup_ids, EmbeddingMatrix, Vocabulary};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context words taken on each side of the center word.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting learning rate, decayed linearly over the run.
    pub lr: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CbowOutcome {
    pub matrix: EmbeddingMatrix,
    /// Summed negative-sampling loss per epoch, accumulated while training.
    pub epoch_losses: Vec<f64>,
}

const NOISE_POWER: f64 = 0.75;
const MIN_LR_FRACTION: f64 = 1e-4;

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Negative-sampling CBOW: the mean of the context vectors predicts the
/// center word against draws from the unigram^0.75 distribution.
pub fn train_cbow<S: AsRef<[String]>>(streams: &[S], vocab: &Vocabulary, cfg: &CbowConfig) -> Result<CbowOutcome> {
    if cfg.dim == 0 || cfg.window == 0 || cfg.negatives == 0 {
        return Err(Error::Config("dim, window and negatives must be at least 1".into()));
    }
    if !(cfg.lr > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let v = vocab.len();
    let d = cfg.dim;
    let mut r = rng::derived(cfg.seed, "cbow");
    let mut input: Vec<f64> = (0..v * d).map(|_| (r.random::<f64>() - 0.5) / d as f64).collect();
    let mut output = vec![0.0; v * d];

    let encoded: Vec<Vec<usize>> = streams.iter().map(|s| lookup_ids(s.as_ref(), vocab)).collect();
    let total_words: usize = encoded.iter().map(Vec::len).sum();

    // Cumulative noise distribution over ids.
    let mut cumulative = Vec::with_capacity(v);
    let mut acc = 0.0;
    for (i, _) in vocab.words().iter().enumerate() {
        // Loaded vocabularies carry no counts; fall back to uniform noise.
        let c = vocab.counts()[i].max(1) as f64;
        acc += c.powf(NOISE_POWER);
        cumulative.push(acc);
    }

    let planned = (cfg.epochs * total_words).max(1) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut hidden = vec![0.0; d];
    let mut err = vec![0.0; d];
    for _ in 0..cfg.epochs {
        let mut loss = 0.0;
        for ids in &encoded {
            for pos in 0..ids.len() {
                let alpha = cfg.lr * (1.0 - processed as f64 / planned).max(MIN_LR_FRACTION);
                processed += 1;
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(ids.len());
                let context: Vec<usize> = (lo..hi).filter(|&p| p != pos).map(|p| ids[p]).collect();
                if context.is_empty() {
                    continue;
                }
                hidden.fill(0.0);
                for &c in &context {
                    for (h, x) in hidden.iter_mut().zip(&input[c * d..(c + 1) * d]) {
                        *h += x;
                    }
                }
                let inv = 1.0 / context.len() as f64;
                hidden.iter_mut().for_each(|h| *h *= inv);
                err.fill(0.0);

                let center = ids[pos];
                for k in 0..=cfg.negatives {
                    let (target, label) = if k == 0 {
                        (center, 1.0)
                    } else {
                        let u = r.random::<f64>() * acc;
                        let t = cumulative.partition_point(|&c| c <= u).min(v - 1);
                        if t == center {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let out_row = &mut output[target * d..(target + 1) * d];
                    let f: f64 = hidden.iter().zip(out_row.iter()).map(|(a, b)| a * b).sum();
                    loss -= if label == 1.0 { log_sigmoid(f) } else { log_sigmoid(-f) };
                    let g = (label - sigmoid(f)) * alpha;
                    for ((e, o), h) in err.iter_mut().zip(out_row.iter_mut()).zip(&hidden) {
                        *e += g * *o;
                        *o += g * h;
                    }
                }
                for &c in &context {
                    for (x, e) in input[c * d..(c + 1) * d].iter_mut().zip(&err) {
                        *x += e;
                    }
                }
            }
        }
        epoch_losses.push(loss);
    }
    let matrix = EmbeddingMatrix::new(v, d, input, Some(output))?;
    Ok(CbowOutcome { matrix, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{prepare_records, synth_corpus, SynthSpec};
    use crate::embedding::build_vocab;
    use crate::textproc::Preprocessor;

    fn small_cfg() -> CbowConfig {
        CbowConfig {
            dim: 16,
            epochs: 3,
            lr: 0.025,
            seed: 3,
            ..CbowConfig::default()
        }
    }

    fn streams() -> Vec<Vec<String>> {
        let c = synth_corpus(&SynthSpec::default(), 11).unwrap();
        prepare_records(&c.records, &Preprocessor::persian_default())
            .into_iter()
            .map(|p| p.tokens)
            .collect()
    }

    #[test]
    fn default_shape_and_determinism() {
        let s = vec![vec!["a".to_string(), "b".into(), "a".into(), "c".into(), "b".into()]];
        let vocab = build_vocab(&s, 1).unwrap();
        let cfg = CbowConfig::default();
        let a = train_cbow(&s, &vocab, &cfg).unwrap();
        assert_eq!((a.matrix.rows(), a.matrix.dim()), (3, 300));
        let b = train_cbow(&s, &vocab, &cfg).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.epoch_losses.len(), 5);
    }

    #[test]
    fn loss_falls_and_values_stay_finite() {
        let s = streams();
        let vocab = build_vocab(&s, 2).unwrap();
        let out = train_cbow(&s, &vocab, &small_cfg()).unwrap();
        assert!(out.epoch_losses[2] < out.epoch_losses[0], "{:?}", out.epoch_losses);
        assert!(out.matrix.vectors().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn invalid_config() {
        let s: Vec<Vec<String>> = vec![];
        let vocab = build_vocab(&s, 1).unwrap();
        let cfg = CbowConfig { window: 0, ..small_cfg() };
        assert!(matches!(train_cbow(&s, &vocab, &cfg), Err(Error::Config(_))));
    }
}
