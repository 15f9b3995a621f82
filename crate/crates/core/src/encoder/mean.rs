use super::{Encoder, ParamSpec};
use crate::tensor::{Tape, Var};
use crate::{Error, Result};

/// Componentwise mean of the word vectors of a text.
pub fn encode_mean(tape: &mut Tape<'_>, text: Var) -> Result<Var> {
    tape.mean_rows(text)
}

pub struct MeanEncoder {
    dim: usize,
}

impl MeanEncoder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        Ok(MeanEncoder { dim })
    }
}

impl Encoder for MeanEncoder {
    fn name(&self) -> &str {
        "mean"
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        Vec::new()
    }

    fn encode<'a>(&self, tape: &mut Tape<'a>, text: Var, _params: &[Var]) -> Result<Var> {
        encode_mean(tape, text)
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::tensor::Tensor;

    fn mean_of(rows: Vec<Vec<f64>>) -> Vec<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_rows(&rows).unwrap(), false);
        let y = encode_mean(&mut tape, x).unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn hand_cases() {
        assert_eq!(mean_of(vec![vec![1.0, 3.0], vec![3.0, 5.0]]), vec![2.0, 4.0]);
        assert_eq!(mean_of(vec![vec![0.3, -2.0]; 5]), vec![0.3, -2.0]);
    }

    #[test]
    fn matches_brute_force_sums_and_ignores_row_order() {
        let mut r = crate::rng::seeded(17);
        for _ in 0..50 {
            let (l, d) = (r.random_range(1..20), r.random_range(1..10));
            let rows: Vec<Vec<f64>> = (0..l).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
            let got = mean_of(rows.clone());
            for c in 0..d {
                let mut s = 0.0;
                for row in &rows {
                    s += row[c];
                }
                assert!((got[c] - s / l as f64).abs() <= 1e-12);
            }
            let mut rev = rows;
            rev.reverse();
            let flipped = mean_of(rev);
            for (a, b) in got.iter().zip(&flipped) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
