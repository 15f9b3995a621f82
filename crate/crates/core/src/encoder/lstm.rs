use super::{Encoder, EncoderConfig, ParamSpec};
use crate::tensor::{Activation, InitScheme, Tape, Var};
use crate::{Error, Result};

/// Gate parameters in input, forget, candidate, output order.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    /// Input kernels, each `D x H`.
    pub w: [Var; 4],
    /// Recurrent kernels, each `H x H`.
    pub u: [Var; 4],
    /// Biases, each `H`.
    pub b: [Var; 4],
}

impl LstmVars {
    /// Unpacks the parameter list produced by [`LstmEncoder::param_specs`].
    pub fn from_slice(p: &[Var]) -> Self {
        LstmVars {
            w: [p[0], p[1], p[2], p[3]],
            u: [p[4], p[5], p[6], p[7]],
            b: [p[8], p[9], p[10], p[11]],
        }
    }
}

const INPUT: usize = 0;
const FORGET: usize = 1;
const CANDIDATE: usize = 2;
const OUTPUT: usize = 3;

/// Single-layer LSTM over the rows of `text`, returning the last hidden
/// state. Gates use the hard sigmoid; the candidate and cell output use tanh.
pub fn encode_lstm(tape: &mut Tape<'_>, text: Var, p: &LstmVars) -> Result<Var> {
    let (steps, width) = tape.value(text).dims2()?;
    let (w_rows, _) = tape.value(p.w[0]).dims2()?;
    if w_rows != width {
        return Err(Error::Shape(format!(
            "LSTM kernels expect width {w_rows}, text has {width}"
        )));
    }
    // Input projections for every step at once.
    let mut projected = [text; 4];
    for g in 0..4 {
        let xw = tape.matmul(text, p.w[g])?;
        projected[g] = tape.add_bias(xw, p.b[g])?;
    }
    let mut h: Option<Var> = None;
    let mut c: Option<Var> = None;
    for t in 0..steps {
        let mut z = [text; 4];
        for g in 0..4 {
            z[g] = tape.row(projected[g], t)?;
            if let Some(h_prev) = h {
                let rec = tape.vecmat(h_prev, p.u[g])?;
                z[g] = tape.add(z[g], rec)?;
            }
        }
        let i = tape.activation(z[INPUT], Activation::HardSigmoid);
        let f = tape.activation(z[FORGET], Activation::HardSigmoid);
        let o = tape.activation(z[OUTPUT], Activation::HardSigmoid);
        let cand = tape.activation(z[CANDIDATE], Activation::Tanh);
        let fresh = tape.mul(i, cand)?;
        let cell = match c {
            Some(c_prev) => {
                let kept = tape.mul(f, c_prev)?;
                tape.add(kept, fresh)?
            }
            None => fresh,
        };
        let squashed = tape.activation(cell, Activation::Tanh);
        h = Some(tape.mul(o, squashed)?);
        c = Some(cell);
    }
    h.ok_or_else(|| Error::Shape("LSTM over an empty sequence".into()))
}

pub struct LstmEncoder {
    dim: usize,
    hidden: usize,
}

impl LstmEncoder {
    pub fn new(cfg: &EncoderConfig) -> Result<Self> {
        if cfg.hidden == 0 {
            return Err(Error::Config("hidden size must be positive".into()));
        }
        Ok(LstmEncoder {
            dim: cfg.dim,
            hidden: cfg.hidden,
        })
    }
}

impl Encoder for LstmEncoder {
    fn name(&self) -> &str {
        "lstm"
    }

    fn output_dim(&self) -> usize {
        self.hidden
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        let (d, h) = (self.dim, self.hidden);
        let mut specs = Vec::with_capacity(12);
        for name in ["w_i", "w_f", "w_c", "w_o"] {
            specs.push(ParamSpec::new(name, vec![d, h], InitScheme::GlorotUniform));
        }
        for name in ["u_i", "u_f", "u_c", "u_o"] {
            specs.push(ParamSpec::new(name, vec![h, h], InitScheme::Orthogonal));
        }
        specs.push(ParamSpec::new("b_i", vec![h], InitScheme::Zeros));
        specs.push(ParamSpec::new("b_f", vec![h], InitScheme::Constant(1)));
        specs.push(ParamSpec::new("b_c", vec![h], InitScheme::Zeros));
        specs.push(ParamSpec::new("b_o", vec![h], InitScheme::Zeros));
        specs
    }

    fn encode<'a>(&self, tape: &mut Tape<'a>, text: Var, params: &[Var]) -> Result<Var> {
        encode_lstm(tape, text, &LstmVars::from_slice(params))
    }
}
