//! Text encoders: fixed-length shaping of a token sequence followed by one
//! of several interchangeable encoders, looked up by name in an
//! [`EncoderRegistry`].

mod cnn;
mod lstm;
mod mean;

pub use cnn::{encode_cnn, encode_cnn_full, CnnEncoder, FullWidthCnnEncoder};
pub use lstm::{encode_lstm, LstmEncoder, LstmVars};
pub use mean::{encode_mean, MeanEncoder};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tensor::{InitScheme, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// Registry name of the encoder.
    pub kind: String,
    /// Rows of every text matrix.
    pub max_len: usize,
    /// Embedding width.
    pub dim: usize,
    /// Use one set of encoder weights for both texts of a pair.
    pub share_weights: bool,
    pub filter_width: usize,
    /// LSTM state size.
    pub hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: "cnn".into(),
            max_len: 40,
            dim: 300,
            share_weights: true,
            filter_width: 3,
            hidden: 300,
        }
    }
}

/// Shape and initializer of one encoder parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub init: InitScheme,
}

impl ParamSpec {
    fn new(name: &'static str, shape: Vec<usize>, init: InitScheme) -> Self {
        ParamSpec { name, shape, init }
    }
}

/// A text encoder: a `max_len x dim` text matrix in, one vector out.
pub trait Encoder: Send + Sync {
    fn name(&self) -> &str;

    /// Length of the produced vector.
    fn output_dim(&self) -> usize;

    /// Parameters in the order [`Encoder::encode`] expects them.
    fn param_specs(&self) -> Vec<ParamSpec>;

    fn encode<'a>(&self, tape: &mut Tape<'a>, text: Var, params: &[Var]) -> Result<Var>;
}

type Factory = Box<dyn Fn(&EncoderConfig) -> Result<Box<dyn Encoder>> + Send + Sync>;

/// Encoders available by name.
pub struct EncoderRegistry {
    factories: BTreeMap<String, Factory>,
}

impl EncoderRegistry {
    pub fn empty() -> Self {
        EncoderRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// `mean`, `cnn` (depthwise), `cnn-full` and `lstm`.
    pub fn builtin() -> Self {
        let mut r = EncoderRegistry::empty();
        r.register("mean", |c| Ok(Box::new(MeanEncoder::new(c.dim)?)))
            .expect("fresh registry");
        r.register("cnn", |c| Ok(Box::new(CnnEncoder::new(c)?)))
            .expect("fresh registry");
        r.register("cnn-full", |c| Ok(Box::new(FullWidthCnnEncoder::new(c)?)))
            .expect("fresh registry");
        r.register("lstm", |c| Ok(Box::new(LstmEncoder::new(c)?)))
            .expect("fresh registry");
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F) -> Result<()>
    where
        F: Fn(&EncoderConfig) -> Result<Box<dyn Encoder>> + Send + Sync + 'static,
    {
        if self.factories.contains_key(name) {
            return Err(Error::Config(format!("encoder {name:?} is already registered")));
        }
        self.factories.insert(name.to_owned(), Box::new(factory));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, cfg: &EncoderConfig) -> Result<Box<dyn Encoder>> {
        let factory = self.factories.get(&cfg.kind).ok_or_else(|| {
            Error::Config(format!(
                "unknown encoder {:?}; available: {}",
                cfg.kind,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        if cfg.max_len == 0 || cfg.dim == 0 {
            return Err(Error::Config("max_len and dim must be positive".into()));
        }
        factory(cfg)
    }
}

impl Default for EncoderRegistry {
    fn default() -> Self {
        EncoderRegistry::builtin()
    }
}

/// Cuts a sequence to its first `len` items, or repeats it from the start
/// until it reaches `len`.
pub fn pad_or_trim<T: Clone>(tokens: &[T], len: usize) -> Result<Vec<T>> {
    if tokens.is_empty() {
        return Err(Error::Validation("cannot pad an empty sequence".into()));
    }
    Ok(tokens.iter().cycle().take(len).cloned().collect())
}

/// Text matrix for `ids`: row `t` is the vector of the `t`-th id after
/// padding or trimming to `max_len`.
pub fn embed_text(ids: &[usize], table: &Tensor, max_len: usize) -> Result<Tensor> {
    let (rows, dim) = table.dims2()?;
    if let Some(bad) = ids.iter().find(|&&i| i >= rows) {
        return Err(Error::Contract(format!("id {bad} outside a {rows}-word table")));
    }
    let ids = pad_or_trim(ids, max_len)?;
    let mut data = Vec::with_capacity(max_len * dim);
    for id in ids {
        data.extend_from_slice(table.row(id));
    }
    Tensor::new(vec![max_len, dim], data)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::tensor::init_weights;

    #[test]
    fn padding_examples() {
        let w = ["w1", "w2", "w3"];
        assert_eq!(pad_or_trim(&w, 7).unwrap(), ["w1", "w2", "w3", "w1", "w2", "w3", "w1"]);
        let forty: Vec<usize> = (0..40).collect();
        assert_eq!(pad_or_trim(&forty, 40).unwrap(), forty);
        let long: Vec<usize> = (0..45).collect();
        assert_eq!(pad_or_trim(&long, 40).unwrap(), forty);
        assert!(matches!(pad_or_trim::<u8>(&[], 40), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn padding_property(n in 1usize..=100) {
            let input: Vec<usize> = (0..n).map(|i| i * 7 + 1).collect();
            let out = pad_or_trim(&input, 40).unwrap();
            prop_assert_eq!(out.len(), 40);
            if n <= 40 {
                for (t, v) in out.iter().enumerate() {
                    prop_assert_eq!(*v, input[t % n]);
                }
            } else {
                prop_assert_eq!(&out[..], &input[..40]);
            }
        }
    }

    #[test]
    fn embed_text_cycles_rows() {
        let table = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let m = embed_text(&[0, 1], &table, 4).unwrap();
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        let same = embed_text(&[1], &table, 3).unwrap();
        assert!((0..3).all(|t| same.row(t) == [3.0, 4.0]));
        assert!(matches!(embed_text(&[2], &table, 3), Err(Error::Contract(_))));
        assert!(embed_text(&[], &table, 3).is_err());
    }

    #[test]
    fn full_scale_shapes() {
        let table = init_weights(&[5, 300], InitScheme::GlorotUniform, 1).unwrap();
        let m = embed_text(&[0, 3, 4], &table, 40).unwrap();
        assert_eq!(m.shape(), &[40, 300]);
        assert_eq!(m.row(3), table.row(0));
        assert_eq!(m.row(5), table.row(4));
    }

    #[test]
    fn registry_lookup() {
        let reg = EncoderRegistry::builtin();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["cnn", "cnn-full", "lstm", "mean"]);
        for name in ["mean", "cnn", "cnn-full", "lstm"] {
            let cfg = EncoderConfig {
                kind: name.into(),
                dim: 6,
                hidden: 6,
                ..EncoderConfig::default()
            };
            let enc = reg.build(&cfg).unwrap();
            assert_eq!(enc.name(), name);
            assert_eq!(enc.output_dim(), 6);
        }
        let unknown = EncoderConfig {
            kind: "gru".into(),
            ..EncoderConfig::default()
        };
        assert!(matches!(reg.build(&unknown), Err(Error::Config(_))));
    }

    #[test]
    fn custom_encoders_can_be_registered() {
        let mut reg = EncoderRegistry::builtin();
        reg.register("mean-alias", |c| Ok(Box::new(MeanEncoder::new(c.dim)?))).unwrap();
        assert!(reg.register("mean", |c| Ok(Box::new(MeanEncoder::new(c.dim)?))).is_err());
        let cfg = EncoderConfig {
            kind: "mean-alias".into(),
            ..EncoderConfig::default()
        };
        assert_eq!(reg.build(&cfg).unwrap().output_dim(), 300);
    }
}
