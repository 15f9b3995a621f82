//! Pair comparison and the four-way score classifier.

use serde::{Deserialize, Serialize};

use crate::tensor::{init_weights, softmax, InitScheme, Tape, Tensor, Var};
use crate::{Error, Result, NUM_SCORES};

/// `concat(|u - v|, u * v)` on the tape. Raw `u` and `v` are deliberately
/// left out of the feature.
pub fn compare(tape: &mut Tape<'_>, u: Var, v: Var) -> Result<Var> {
    let diff = tape.sub(u, v)?;
    let dist = tape.abs(diff);
    let prod = tape.mul(u, v)?;
    tape.concat(&[dist, prod])
}

/// Plain-vector version of [`compare`].
pub fn compare_vectors(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("compare: {} vs {} components", u.len(), v.len())));
    }
    let mut f: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b).abs()).collect();
    f.extend(u.iter().zip(v).map(|(a, b)| a * b));
    Ok(f)
}

/// Dense `2D -> 4` layer weights.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl HeadParams {
    /// Glorot-uniform `W`, zero `b`, for encoder outputs of length `dim`.
    pub fn init(dim: usize, seed: u64) -> Result<Self> {
        Ok(HeadParams {
            w: init_weights(&[2 * dim, NUM_SCORES], InitScheme::GlorotUniform, seed)?,
            b: Tensor::zeros(&[NUM_SCORES])?,
        })
    }
}

/// Logits `f W + b` on the tape; pair with a softmax or
/// [`Tape::softmax_cross_entropy`].
pub fn head_logits(tape: &mut Tape<'_>, feature: Var, w: Var, b: Var) -> Result<Var> {
    let z = tape.vecmat(feature, w)?;
    tape.add(z, b)
}

/// Probabilities of scores 0 to 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution(pub [f64; NUM_SCORES]);

impl ScoreDistribution {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let p: [f64; NUM_SCORES] = softmax(logits)
            .try_into()
            .map_err(|_| Error::Shape(format!("expected {NUM_SCORES} logits, got {}", logits.len())))?;
        Ok(ScoreDistribution(p))
    }

    pub fn probs(&self) -> &[f64; NUM_SCORES] {
        &self.0
    }
}

pub fn classify(feature: &[f64], p: &HeadParams) -> Result<ScoreDistribution> {
    let (rows, cols) = p.w.dims2()?;
    if rows != feature.len() || cols != NUM_SCORES || p.b.numel() != NUM_SCORES {
        return Err(Error::Shape(format!(
            "head is {rows}x{cols} (+{}), feature has {} components",
            p.b.numel(),
            feature.len()
        )));
    }
    let mut logits = p.b.data().to_vec();
    for (r, &x) in feature.iter().enumerate() {
        for (c, l) in logits.iter_mut().enumerate() {
            *l += x * p.w.at2(r, c);
        }
    }
    ScoreDistribution::from_logits(&logits)
}

/// Most probable score; ties go to the lower score.
pub fn predict_score(d: &ScoreDistribution) -> u8 {
    let mut best = 0;
    for (i, &p) in d.0.iter().enumerate().skip(1) {
        if p > d.0[best] {
            best = i;
        }
    }
    best as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check_tape, GradCheckOptions};

    #[test]
    fn compare_examples() {
        assert_eq!(compare_vectors(&[1.0, -2.0], &[3.0, 1.0]).unwrap(), vec![2.0, 3.0, 3.0, -2.0]);
        let u = [0.5, -1.5, 2.0];
        assert_eq!(compare_vectors(&u, &u).unwrap(), vec![0.0, 0.0, 0.0, 0.25, 2.25, 4.0]);
        assert!(matches!(compare_vectors(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));

        let mut tape = Tape::new();
        let a = tape.leaf(init_weights(&[300], InitScheme::GlorotUniform, 1).unwrap(), false);
        let b = tape.leaf(init_weights(&[300], InitScheme::GlorotUniform, 2).unwrap(), false);
        let f = compare(&mut tape, a, b).unwrap();
        assert_eq!(tape.value(f).shape(), &[600]);
        let expect = compare_vectors(tape.value(a).data(), tape.value(b).data()).unwrap();
        assert_eq!(tape.value(f).data(), &expect[..]);
        let g = compare(&mut tape, b, a).unwrap();
        assert_eq!(tape.value(f), tape.value(g));
    }

    #[test]
    fn classify_examples() {
        let zero = HeadParams {
            w: Tensor::zeros(&[4, 4]).unwrap(),
            b: Tensor::zeros(&[4]).unwrap(),
        };
        assert_eq!(classify(&[1.0, 2.0, 3.0, 4.0], &zero).unwrap().0, [0.25; 4]);

        let mut p = zero.clone();
        p.b.data_mut()[3] = 3f64.ln();
        let d = classify(&[0.3, 0.1, 0.0, 9.0], &p).unwrap();
        for (got, want) in d.0.iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(classify(&[1.0; 3], &zero).is_err());
    }

    #[test]
    fn bias_shift_leaves_distribution_unchanged() {
        let mut p = HeadParams::init(5, 3).unwrap();
        p.b.data_mut().copy_from_slice(&[0.1, -0.2, 0.3, 0.05]);
        let f: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let before = classify(&f, &p).unwrap();
        assert!((before.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        p.b.data_mut().iter_mut().for_each(|v| *v += 7.5);
        let after = classify(&f, &p).unwrap();
        for (a, b) in before.0.iter().zip(&after.0) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn argmax_with_low_tie_break() {
        let s = |p| predict_score(&ScoreDistribution(p));
        assert_eq!(s([0.1, 0.2, 0.3, 0.4]), 3);
        assert_eq!(s([0.25; 4]), 0);
        assert_eq!(s([0.0, 0.9, 0.05, 0.05]), 1);
        assert_eq!(s([0.1, 0.4, 0.1, 0.4]), 1);
    }

    #[test]
    fn loss_gradient_through_compare() {
        // Components of u - v stay well away from zero.
        let u = Tensor::vector(vec![0.9, -0.4, 0.3, 1.2]).unwrap();
        let v = Tensor::vector(vec![0.1, 0.5, -0.6, 0.2]).unwrap();
        let head = HeadParams::init(4, 11).unwrap();
        let mut b = head.b.clone();
        b.data_mut().copy_from_slice(&[0.2, -0.1, 0.0, 0.3]);
        let target = Tensor::vector(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let rep = grad_check_tape(
            |t, p| {
                let f = compare(t, p[0], p[1])?;
                let z = head_logits(t, f, p[2], p[3])?;
                t.softmax_cross_entropy(z, &target)
            },
            &[u, v, head.w, b],
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(rep.max_rel_error <= 1e-3, "{rep:?}");
    }
}
