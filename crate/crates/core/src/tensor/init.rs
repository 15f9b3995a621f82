use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    HeUniform,
    GlorotUniform,
    Orthogonal,
    Zeros,
    /// All entries set to one value; used for the LSTM forget-gate bias.
    Constant(i8),
}

/// Fan-in and fan-out of a weight shape. A 2-D shape is `[fan_in, fan_out]`;
/// for higher ranks the leading axes are the receptive field.
fn fans(shape: &[usize]) -> (f64, f64) {
    match shape {
        [n] => (*n as f64, *n as f64),
        [i, o] => (*i as f64, *o as f64),
        _ => {
            let n = shape.len();
            let receptive: usize = shape[..n - 2].iter().product();
            (
                (shape[n - 2] * receptive) as f64,
                (shape[n - 1] * receptive) as f64,
            )
        }
    }
}

pub fn init_weights(shape: &[usize], scheme: InitScheme, seed: u64) -> Result<Tensor> {
    let mut t = Tensor::zeros(shape)?;
    let mut r = rng::seeded(seed);
    let (fan_in, fan_out) = fans(shape);
    match scheme {
        InitScheme::Zeros => {}
        InitScheme::Constant(c) => t.data_mut().fill(f64::from(c)),
        InitScheme::HeUniform | InitScheme::GlorotUniform => {
            let limit = if scheme == InitScheme::HeUniform {
                (6.0 / fan_in).sqrt()
            } else {
                (6.0 / (fan_in + fan_out)).sqrt()
            };
            for v in t.data_mut() {
                *v = r.random_range(-limit..=limit);
            }
        }
        InitScheme::Orthogonal => {
            let [rows, cols] = shape[..] else {
                return Err(Error::Shape(format!(
                    "orthogonal init needs a 2-D shape, got {shape:?}"
                )));
            };
            // QR of a tall Gaussian matrix; a wide shape takes the transpose.
            let (tall, short) = (rows.max(cols), rows.min(cols));
            let g = DMatrix::<f64>::from_fn(tall, short, |_, _| StandardNormal.sample(&mut r));
            let qr = g.qr();
            let mut q = qr.q();
            let rdiag = qr.r().diagonal();
            for (j, d) in rdiag.iter().enumerate() {
                if *d < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            let q = if rows >= cols { q } else { q.transpose() };
            for i in 0..rows {
                for j in 0..cols {
                    t.data_mut()[i * cols + j] = q[(i, j)];
                }
            }
        }
    }
    Ok(t)
}
