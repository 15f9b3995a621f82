use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, Vocabulary};
use crate::encoder::{EncoderConfig, EncoderRegistry};
use crate::model::SimModel;
use crate::tensor::{check_gradients, GradCheckOptions, GradCheckReport, Tensor};
use crate::{rng, Result, NUM_SCORES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradSuiteConfig {
    pub encoders: Vec<String>,
    pub max_len: usize,
    pub dim: usize,
    pub hidden: usize,
    pub vocab_size: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        GradSuiteConfig {
            encoders: vec!["mean".into(), "cnn".into(), "lstm".into()],
            max_len: 10,
            dim: 8,
            hidden: 8,
            vocab_size: 12,
            eps: 1e-4,
            seed: 0,
        }
    }
}

/// Checks the full model gradient (word vectors, encoder and head) of one
/// random labelled pair per encoder against central differences.
pub fn gradient_suite(cfg: &GradSuiteConfig) -> Result<Vec<(String, GradCheckReport)>> {
    let registry = EncoderRegistry::builtin();
    let mut out = Vec::new();
    for kind in &cfg.encoders {
        let mut r = rng::derived(cfg.seed, kind);
        let words = (0..cfg.vocab_size).map(|i| format!("t{i}")).collect();
        let vocab = Vocabulary::from_words(words)?;
        let table = (0..cfg.vocab_size * cfg.dim).map(|_| r.random_range(-0.5..0.5)).collect();
        let emb = EmbeddingMatrix::new(cfg.vocab_size, cfg.dim, table, None)?;
        let enc = EncoderConfig {
            kind: kind.clone(),
            max_len: cfg.max_len,
            dim: cfg.dim,
            hidden: cfg.hidden,
            ..EncoderConfig::default()
        };
        let mut model = SimModel::new(&registry, enc, vocab, &emb, r.random())?;
        // Small random biases so nothing starts exactly on a kink.
        let n = model.params().len();
        for p in &mut model.params_mut()[1..n] {
            if p.rank() == 1 {
                p.data_mut().iter_mut().for_each(|v| *v += r.random_range(-0.1..0.1));
            }
        }
        // One text shorter than max_len (padded) and one longer (trimmed).
        let mut text = |len: usize| -> Vec<usize> { (0..len).map(|_| r.random_range(0..cfg.vocab_size)).collect() };
        let a = text(cfg.max_len / 2 + 1);
        let b = text(cfg.max_len + 3);
        let score = r.random_range(0..NUM_SCORES) as u8;

        let mut analytic = model.zero_grads();
        model.accumulate(&a, &b, score, true, &mut analytic)?;
        let names = model.names().to_vec();
        let opts = GradCheckOptions {
            eps: cfg.eps,
            seed: cfg.seed,
            ..GradCheckOptions::default()
        };
        let report = check_gradients(
            |ps: &[Tensor]| {
                let named = names.iter().cloned().zip(ps.iter().cloned()).collect();
                let m = SimModel::from_named(&registry, model.config().clone(), model.vocab().clone(), named)?;
                let mut scratch = m.zero_grads();
                m.accumulate(&a, &b, score, false, &mut scratch)
            },
            model.params(),
            &analytic,
            opts,
        )?;
        out.push((kind.clone(), report));
    }
    Ok(out)
}
