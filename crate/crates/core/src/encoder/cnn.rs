use super::{Encoder, EncoderConfig, ParamSpec};
use crate::tensor::{Activation, InitScheme, Tape, Var};
use crate::{Error, Result};

/// Depthwise convolution, ReLU, then max over time.
pub fn encode_cnn(tape: &mut Tape<'_>, text: Var, kernel: Var, bias: Var) -> Result<Var> {
    let conv = tape.depthwise_conv1d(text, kernel, bias)?;
    let act = tape.activation(conv, Activation::Relu);
    tape.maxpool_over_time(act)
}

/// Full-width convolution (every filter spans all embedding dimensions),
/// ReLU, then max over time.
pub fn encode_cnn_full(tape: &mut Tape<'_>, text: Var, kernel: Var, bias: Var) -> Result<Var> {
    let conv = tape.conv1d(text, kernel, bias)?;
    let act = tape.activation(conv, Activation::Relu);
    tape.maxpool_over_time(act)
}

fn check_width(cfg: &EncoderConfig) -> Result<()> {
    if cfg.filter_width == 0 || cfg.max_len < cfg.filter_width {
        return Err(Error::Config(format!(
            "filter width {} must be in 1..={}",
            cfg.filter_width, cfg.max_len
        )));
    }
    Ok(())
}

/// One `k x 1` filter per embedding dimension: a `L x D` text becomes
/// `(L - k + 1) x D` and pools to `D`.
pub struct CnnEncoder {
    dim: usize,
    width: usize,
}

impl CnnEncoder {
    pub fn new(cfg: &EncoderConfig) -> Result<Self> {
        check_width(cfg)?;
        Ok(CnnEncoder {
            dim: cfg.dim,
            width: cfg.filter_width,
        })
    }
}

impl Encoder for CnnEncoder {
    fn name(&self) -> &str {
        "cnn"
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("w", vec![self.width, self.dim], InitScheme::HeUniform),
            ParamSpec::new("b", vec![self.dim], InitScheme::Zeros),
        ]
    }

    fn encode<'a>(&self, tape: &mut Tape<'a>, text: Var, params: &[Var]) -> Result<Var> {
        encode_cnn(tape, text, params[0], params[1])
    }
}

/// `D` filters of size `k x D`.
pub struct FullWidthCnnEncoder {
    dim: usize,
    width: usize,
}

impl FullWidthCnnEncoder {
    pub fn new(cfg: &EncoderConfig) -> Result<Self> {
        check_width(cfg)?;
        Ok(FullWidthCnnEncoder {
            dim: cfg.dim,
            width: cfg.filter_width,
        })
    }
}

impl Encoder for FullWidthCnnEncoder {
    fn name(&self) -> &str {
        "cnn-full"
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("w", vec![self.width * self.dim, self.dim], InitScheme::HeUniform),
            ParamSpec::new("b", vec![self.dim], InitScheme::Zeros),
        ]
    }

    fn encode<'a>(&self, tape: &mut Tape<'a>, text: Var, params: &[Var]) -> Result<Var> {
        encode_cnn_full(tape, text, params[0], params[1])
    }
}
