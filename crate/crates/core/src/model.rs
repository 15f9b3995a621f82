//! The full pair model: embedding table, one or two encoders, comparison
//! and the score head, stored as a flat list of named tensors.

use std::ops::Range;

use rand::Rng as _;

use crate::embedding::{lookup_ids, EmbeddingMatrix, Vocabulary};
use crate::encoder::{pad_or_trim, Encoder, EncoderConfig, EncoderRegistry};
use crate::simhead::{compare, head_logits, ScoreDistribution};
use crate::tensor::{init_weights, InitScheme, Tape, Tensor, Var};
use crate::{rng, Error, Result, NUM_SCORES};

pub const EMBEDDING: &str = "embedding";

pub struct SimModel {
    config: EncoderConfig,
    encoder: Box<dyn Encoder>,
    vocab: Vocabulary,
    names: Vec<String>,
    params: Vec<Tensor>,
    n_enc: usize,
}

/// Parameter names, shapes and initializers in storage order.
fn layout(encoder: &dyn Encoder, cfg: &EncoderConfig, vocab_len: usize) -> Vec<(String, Vec<usize>, InitScheme)> {
    let mut out = vec![(EMBEDDING.to_owned(), vec![vocab_len, cfg.dim], InitScheme::Zeros)];
    let prefixes: &[&str] = if cfg.share_weights { &["enc"] } else { &["enc_a", "enc_b"] };
    for prefix in prefixes {
        for spec in encoder.param_specs() {
            out.push((format!("{prefix}.{}", spec.name), spec.shape, spec.init));
        }
    }
    let out_dim = encoder.output_dim();
    out.push(("head.w".into(), vec![2 * out_dim, NUM_SCORES], InitScheme::GlorotUniform));
    out.push(("head.b".into(), vec![NUM_SCORES], InitScheme::Zeros));
    out
}

impl SimModel {
    /// Fresh model around pretrained word vectors. Every other parameter is
    /// drawn from its own stream derived from `seed` and its name.
    pub fn new(
        registry: &EncoderRegistry,
        config: EncoderConfig,
        vocab: Vocabulary,
        embedding: &EmbeddingMatrix,
        seed: u64,
    ) -> Result<Self> {
        if embedding.rows() != vocab.len() || embedding.dim() != config.dim {
            return Err(Error::Compatibility(format!(
                "embedding table is {}x{}, model expects {}x{}",
                embedding.rows(),
                embedding.dim(),
                vocab.len(),
                config.dim
            )));
        }
        let encoder = registry.build(&config)?;
        let mut named = Vec::new();
        for (name, shape, init) in layout(encoder.as_ref(), &config, vocab.len()) {
            let tensor = if name == EMBEDDING {
                embedding.to_tensor()?
            } else {
                let param_seed = rng::derived(seed, &name).random::<u64>();
                init_weights(&shape, init, param_seed)?
            };
            named.push((name, tensor));
        }
        Self::assemble(config, encoder, vocab, named)
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_named(
        registry: &EncoderRegistry,
        config: EncoderConfig,
        vocab: Vocabulary,
        named: Vec<(String, Tensor)>,
    ) -> Result<Self> {
        let encoder = registry.build(&config)?;
        Self::assemble(config, encoder, vocab, named)
    }

    fn assemble(
        config: EncoderConfig,
        encoder: Box<dyn Encoder>,
        vocab: Vocabulary,
        named: Vec<(String, Tensor)>,
    ) -> Result<Self> {
        let expected = layout(encoder.as_ref(), &config, vocab.len());
        if expected.len() != named.len() {
            return Err(Error::Compatibility(format!(
                "{} parameters given, {} encoder needs {}",
                named.len(),
                config.kind,
                expected.len()
            )));
        }
        for ((want_name, want_shape, _), (name, t)) in expected.iter().zip(&named) {
            if want_name != name || want_shape.as_slice() != t.shape() {
                return Err(Error::Compatibility(format!(
                    "parameter {name} {:?} where {want_name} {want_shape:?} was expected",
                    t.shape()
                )));
            }
        }
        let n_enc = encoder.param_specs().len();
        let (names, params) = named.into_iter().unzip();
        Ok(SimModel {
            config,
            encoder,
            vocab,
            names,
            params,
            n_enc,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn encoder_name(&self) -> &str {
        self.encoder.name()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    /// Storage indices of the encoder weights applied to the first or
    /// second text. Equal ranges mean the weights are shared.
    pub fn encoder_params(&self, second: bool) -> Range<usize> {
        if second && !self.config.share_weights {
            1 + self.n_enc..1 + 2 * self.n_enc
        } else {
            1..1 + self.n_enc
        }
    }

    fn head_index(&self) -> usize {
        self.params.len() - 2
    }

    /// Known-word ids of a token list; OOV tokens are dropped.
    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        lookup_ids(tokens, &self.vocab)
    }

    fn text_matrix(&self, padded: &[usize]) -> Result<Tensor> {
        let table = &self.params[0];
        let dim = self.config.dim;
        let mut data = Vec::with_capacity(padded.len() * dim);
        for &id in padded {
            if id >= self.vocab.len() {
                return Err(Error::Contract(format!("id {id} outside a {}-word table", self.vocab.len())));
            }
            data.extend_from_slice(table.row(id));
        }
        Tensor::new(vec![padded.len(), dim], data)
    }

    /// Builds logits for one pair. Returns the logits, the two text-matrix
    /// leaves and the variables of `params[1..]`.
    fn forward<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        a: Tensor,
        b: Tensor,
        grads: bool,
    ) -> Result<(Var, Var, Var, Vec<Var>)> {
        let xa = tape.leaf(a, grads);
        let xb = tape.leaf(b, grads);
        let vars: Vec<Var> = self.params[1..].iter().map(|p| tape.leaf_ref(p, grads)).collect();
        let side = |second: bool| {
            let r = self.encoder_params(second);
            r.start - 1..r.end - 1
        };
        let u = self.encoder.encode(tape, xa, &vars[side(false)])?;
        let v = self.encoder.encode(tape, xb, &vars[side(true)])?;
        let f = compare(tape, u, v)?;
        let h = self.head_index() - 1;
        let logits = head_logits(tape, f, vars[h], vars[h + 1])?;
        Ok((logits, xa, xb, vars))
    }

    /// Score distribution for two id sequences (both nonempty).
    pub fn predict_ids(&self, a: &[usize], b: &[usize]) -> Result<ScoreDistribution> {
        let len = self.config.max_len;
        let xa = self.text_matrix(&pad_or_trim(a, len)?)?;
        let xb = self.text_matrix(&pad_or_trim(b, len)?)?;
        let mut tape = Tape::new();
        let (logits, ..) = self.forward(&mut tape, xa, xb, false)?;
        ScoreDistribution::from_logits(tape.value(logits).data())
    }

    /// `None` when either text has no known word.
    pub fn predict_tokens(&self, a: &[String], b: &[String]) -> Result<Option<ScoreDistribution>> {
        let (a, b) = (self.ids(a), self.ids(b));
        if a.is_empty() || b.is_empty() {
            return Ok(None);
        }
        self.predict_ids(&a, &b).map(Some)
    }

    /// Zero tensors shaped like the parameters.
    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|p| Tensor::zeros(p.shape()).expect("parameter shapes are valid"))
            .collect()
    }

    /// Cross-entropy of one labelled pair; adds its gradient into `acc`.
    /// The embedding gradient is only accumulated when `tune_embedding`.
    pub fn accumulate(
        &self,
        a: &[usize],
        b: &[usize],
        score: u8,
        tune_embedding: bool,
        acc: &mut [Tensor],
    ) -> Result<f64> {
        let score = score as usize;
        if score >= NUM_SCORES {
            return Err(Error::Validation(format!("score {score} outside 0..{NUM_SCORES}")));
        }
        let len = self.config.max_len;
        let (pa, pb) = (pad_or_trim(a, len)?, pad_or_trim(b, len)?);
        let (xa, xb) = (self.text_matrix(&pa)?, self.text_matrix(&pb)?);
        let mut onehot = Tensor::zeros(&[NUM_SCORES])?;
        onehot.data_mut()[score] = 1.0;

        let mut tape = Tape::new();
        let (logits, va, vb, vars) = self.forward(&mut tape, xa, xb, true)?;
        let loss = tape.softmax_cross_entropy(logits, &onehot)?;
        let grads = tape.backward(loss)?;

        for (slot, var) in acc[1..].iter_mut().zip(&vars) {
            if let Some(g) = grads.get(*var) {
                slot.data_mut().iter_mut().zip(g).for_each(|(s, g)| *s += g);
            }
        }
        if tune_embedding {
            let dim = self.config.dim;
            let table = acc[0].data_mut();
            for (padded, var) in [(&pa, va), (&pb, vb)] {
                let g = grads.get(var).expect("text leaves require grad");
                for (t, &id) in padded.iter().enumerate() {
                    let dst = &mut table[id * dim..(id + 1) * dim];
                    dst.iter_mut().zip(&g[t * dim..(t + 1) * dim]).for_each(|(s, g)| *s += g);
                }
            }
        }
        Ok(tape.value(loss).data()[0])
    }
}
