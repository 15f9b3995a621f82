//! Binary model container: magic, format version, a JSON header with the
//! training config and vocabulary, then one record per tensor.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::embedding::Vocabulary;
use crate::encoder::EncoderRegistry;
use crate::model::SimModel;
use crate::tensor::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"PAIRSIM\0";
pub const FORMAT_VERSION: u32 = 1;

pub struct Checkpoint {
    pub train: TrainConfig,
    pub model: SimModel,
    /// Digest of the run configuration that produced the model, if known.
    pub config_digest: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    train: TrainConfig,
    #[serde(default)]
    config_digest: Option<String>,
    words: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get(r)?))
}

fn get_bytes(r: &mut impl Read, len: u64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len).read_to_end(&mut buf)?;
    if buf.len() as u64 != len {
        return Err(std::io::Error::from(std::io::ErrorKind::UnexpectedEof).into());
    }
    Ok(buf)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let vocab = self.model.vocab();
        let header = serde_json::to_vec(&Header {
            train: self.train.clone(),
            config_digest: self.config_digest.clone(),
            words: vocab.words().to_vec(),
            counts: vocab.counts().to_vec(),
            min_count: vocab.min_count(),
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u64(&mut out, header.len() as u64);
        out.extend_from_slice(&header);
        put_u32(&mut out, self.model.params().len() as u32);
        for (name, t) in self.model.named() {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.rank() as u32);
            for &d in t.shape() {
                put_u64(&mut out, d as u64);
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8], registry: &EncoderRegistry) -> Result<Self> {
        let r = &mut bytes;
        if &get::<8>(r)? != MAGIC {
            return Err(Error::Compatibility("not a model checkpoint".into()));
        }
        let version = get_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Compatibility(format!(
                "checkpoint format {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let header_len = get_u64(r)?;
        let header: Header = serde_json::from_slice(&get_bytes(r, header_len)?)?;
        let count = get_u32(r)?;
        let mut named = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = get_u32(r)?;
            let name = String::from_utf8(get_bytes(r, name_len as u64)?)
                .map_err(|e| Error::Compatibility(format!("tensor name: {e}")))?;
            let rank = get_u32(r)?;
            let shape = (0..rank).map(|_| get_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            let numel = numel.filter(|&n| n * 8 <= r.len()).ok_or_else(|| {
                Error::Compatibility(format!("tensor {name} {shape:?} does not fit in the file"))
            })?;
            let data = (0..numel)
                .map(|_| get(r).map(f64::from_le_bytes))
                .collect::<Result<Vec<_>>>()?;
            named.push((name, Tensor::new(shape, data)?));
        }
        if !r.is_empty() {
            return Err(Error::Compatibility(format!("{} trailing bytes", r.len())));
        }
        let vocab = Vocabulary::with_counts(header.words, header.counts, header.min_count)?;
        let model = SimModel::from_named(registry, header.train.encoder.clone(), vocab, named)?;
        Ok(Checkpoint {
            train: header.train,
            model,
            config_digest: header.config_digest,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(path, &EncoderRegistry::builtin())
    }

    pub fn load_with(path: impl AsRef<Path>, registry: &EncoderRegistry) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, registry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingMatrix;
    use crate::encoder::EncoderConfig;
    use crate::tensor::{init_weights, InitScheme};

    fn checkpoint(kind: &str) -> Checkpoint {
        let vocab = Vocabulary::with_counts(vec!["a".into(), "ب".into(), "c".into()], vec![5, 3, 2], 2).unwrap();
        let t = init_weights(&[3, 4], InitScheme::GlorotUniform, 1).unwrap();
        let emb = EmbeddingMatrix::new(3, 4, t.into_data(), None).unwrap();
        let mut train = TrainConfig::full_scale(kind);
        train.encoder = EncoderConfig {
            kind: kind.into(),
            max_len: 5,
            dim: 4,
            hidden: 3,
            ..EncoderConfig::default()
        };
        let model = SimModel::new(&EncoderRegistry::builtin(), train.encoder.clone(), vocab, &emb, 8).unwrap();
        Checkpoint {
            train,
            model,
            config_digest: Some("abc".into()),
        }
    }

    #[test]
    fn round_trip_keeps_everything() {
        for kind in ["mean", "cnn", "cnn-full", "lstm"] {
            let c = checkpoint(kind);
            let bytes = c.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes, &EncoderRegistry::builtin()).unwrap();
            assert_eq!(back.train, c.train);
            assert_eq!(back.config_digest.as_deref(), Some("abc"));
            assert_eq!(back.model.vocab(), c.model.vocab());
            assert_eq!(back.model.names(), c.model.names());
            let bits = |m: &SimModel| m.params().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect::<Vec<_>>();
            assert_eq!(bits(&back.model), bits(&c.model));
            assert_eq!(back.to_bytes().unwrap(), bytes);
            assert_eq!(
                back.model.predict_ids(&[0, 2], &[1]).unwrap(),
                c.model.predict_ids(&[0, 2], &[1]).unwrap()
            );
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let bytes = checkpoint("cnn").to_bytes().unwrap();
        let reg = EncoderRegistry::builtin();
        assert!(matches!(Checkpoint::from_bytes(b"nonsense", &reg), Err(Error::Compatibility(_))));
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&wrong_version, &reg), Err(Error::Compatibility(_))));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3], &reg).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(Checkpoint::from_bytes(&longer, &reg).is_err());
    }
}
