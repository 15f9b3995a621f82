use rand::seq::index;

use super::{Tape, Tensor, Var};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Tensors with more coordinates than this are checked on a seeded
    /// random subsample of this many coordinates.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-4,
            max_coords: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst relative error per parameter tensor.
    pub per_param: Vec<f64>,
    pub coords_checked: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares `analytic` gradients against central differences of `f`.
///
/// `f` must be deterministic; it is evaluated twice at the base point and
/// any bitwise difference is reported as an unreliable oracle.
pub fn check_gradients<F>(
    mut f: F,
    params: &[Tensor],
    analytic: &[Tensor],
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if !(opts.eps > 0.0 && opts.eps <= 1e-2) {
        return Err(Error::Validation(format!(
            "finite-difference step {} outside (0, 1e-2]",
            opts.eps
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} analytic gradients",
            params.len(),
            analytic.len()
        )));
    }
    for (p, g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} differs from parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    let first = f(params)?;
    let second = f(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::UnreliableOracle(format!(
            "function returned {first} then {second} for identical inputs"
        )));
    }

    let mut r = rng::derived(opts.seed, "gradcheck");
    let mut work: Vec<Tensor> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    let mut coords_checked = 0;
    for (pi, g) in analytic.iter().enumerate() {
        let n = params[pi].numel();
        let coords: Vec<usize> = if n <= opts.max_coords {
            (0..n).collect()
        } else {
            let mut picked = index::sample(&mut r, n, opts.max_coords).into_vec();
            picked.sort_unstable();
            picked
        };
        let mut worst: f64 = 0.0;
        for &c in &coords {
            let orig = work[pi].data()[c];
            work[pi].data_mut()[c] = orig + opts.eps;
            let plus = f(&work)?;
            work[pi].data_mut()[c] = orig - opts.eps;
            let minus = f(&work)?;
            work[pi].data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            worst = worst.max(rel_error(g.data()[c], numeric));
        }
        coords_checked += coords.len();
        per_param.push(worst);
    }
    Ok(GradCheckReport {
        max_rel_error: per_param.iter().copied().fold(0.0, f64::max),
        per_param,
        coords_checked,
    })
}

/// Gradient check for a loss built on a [`Tape`] from the given parameters.
pub fn grad_check_tape<F>(build: F, params: &[Tensor], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf_ref(p, true)).collect();
        let loss = build(&mut tape, &vars)?;
        let grads = tape.backward(loss)?;
        vars.iter()
            .map(|v| grads.tensor(*v).expect("parameters require gradients"))
            .collect::<Vec<_>>()
    };
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf_ref(p, false)).collect();
        let loss = build(&mut tape, &vars)?;
        Ok(tape.value(loss).data()[0])
    };
    check_gradients(eval, params, &analytic, opts)
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::tensor::{init_weights, Activation, InitScheme};

    fn opts() -> GradCheckOptions {
        GradCheckOptions {
            eps: 1e-4,
            ..Default::default()
        }
    }

    #[test]
    fn square_at_three() {
        let x = Tensor::scalar(3.0);
        let analytic = Tensor::scalar(6.0);
        let rep = check_gradients(
            |p| Ok(p[0].data()[0].powi(2)),
            &[x],
            &[analytic],
            GradCheckOptions { eps: 1e-5, ..Default::default() },
        )
        .unwrap();
        assert!(rep.max_rel_error <= 1e-7, "{rep:?}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let rep = check_gradients(
            |_| Ok(4.2),
            &[Tensor::vector(vec![1.0, 2.0]).unwrap()],
            &[Tensor::zeros(&[2]).unwrap()],
            opts(),
        )
        .unwrap();
        assert!(rep.max_rel_error <= 1e-4);
    }

    #[test]
    fn nondeterministic_function_is_detected() {
        let calls = Cell::new(0u32);
        let res = check_gradients(
            |_| {
                calls.set(calls.get() + 1);
                Ok(f64::from(calls.get()))
            },
            &[Tensor::scalar(0.0)],
            &[Tensor::scalar(0.0)],
            opts(),
        );
        assert!(matches!(res, Err(Error::UnreliableOracle(_))));
    }

    #[test]
    fn step_size_is_validated() {
        for eps in [0.0, -1e-4, 0.1] {
            let res = check_gradients(
                |_| Ok(0.0),
                &[Tensor::scalar(0.0)],
                &[Tensor::scalar(0.0)],
                GradCheckOptions { eps, ..Default::default() },
            );
            assert!(matches!(res, Err(Error::Validation(_))));
        }
    }

    fn random(shape: &[usize], seed: u64) -> Tensor {
        init_weights(shape, InitScheme::GlorotUniform, seed).unwrap()
    }

    /// One scalar loss per differentiable operation, checked against
    /// central differences.
    #[test]
    fn every_op_matches_finite_differences() {
        type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;
        let cases: Vec<(&str, Vec<Tensor>, Build)> = vec![
            (
                "matmul",
                vec![random(&[3, 4], 1), random(&[4, 2], 2)],
                Box::new(|t, v| {
                    let y = t.matmul(v[0], v[1])?;
                    let y2 = t.mul(y, y)?;
                    Ok(t.sum(y2))
                }),
            ),
            (
                "vecmat+bias",
                vec![random(&[4], 3), random(&[4, 3], 4), random(&[3], 5)],
                Box::new(|t, v| {
                    let y = t.vecmat(v[0], v[1])?;
                    let y = t.add_bias(y, v[2])?;
                    let y = t.activation(y, Activation::Tanh);
                    Ok(t.sum(y))
                }),
            ),
            (
                "sub/abs/concat",
                vec![random(&[5], 6), random(&[5], 7)],
                Box::new(|t, v| {
                    let d = t.sub(v[0], v[1])?;
                    let a = t.abs(d);
                    let m = t.mul(v[0], v[1])?;
                    let c = t.concat(&[a, m])?;
                    let c = t.activation(c, Activation::Sigmoid);
                    Ok(t.sum(c))
                }),
            ),
            (
                "depthwise conv + relu + maxpool",
                vec![random(&[7, 3], 8), random(&[3, 3], 9), random(&[3], 10)],
                Box::new(|t, v| {
                    let c = t.depthwise_conv1d(v[0], v[1], v[2])?;
                    let r = t.activation(c, Activation::Relu);
                    let p = t.maxpool_over_time(r)?;
                    let s = t.mul(p, p)?;
                    Ok(t.sum(s))
                }),
            ),
            (
                "full conv + mean",
                vec![random(&[6, 3], 11), random(&[9, 4], 12), random(&[4], 13)],
                Box::new(|t, v| {
                    let c = t.conv1d(v[0], v[1], v[2])?;
                    let r = t.activation(c, Activation::Tanh);
                    let m = t.mean_rows(r)?;
                    let m = t.scale(m, 1.7);
                    let s = t.mul(m, m)?;
                    Ok(t.sum(s))
                }),
            ),
            (
                "row + hard sigmoid + softmax ce",
                vec![random(&[3, 4], 14)],
                Box::new(|t, v| {
                    let r0 = t.row(v[0], 0)?;
                    let r2 = t.row(v[0], 2)?;
                    let h = t.activation(r0, Activation::HardSigmoid);
                    let z = t.add(h, r2)?;
                    let onehot = Tensor::vector(vec![0.0, 1.0, 0.0, 0.0])?;
                    t.softmax_cross_entropy(z, &onehot)
                }),
            ),
        ];
        for (name, params, build) in cases {
            let rep = grad_check_tape(build, &params, opts()).unwrap();
            assert!(rep.max_rel_error <= 1e-3, "{name}: {rep:?}");
        }
    }

    #[test]
    fn large_tensors_are_subsampled() {
        let p = random(&[30, 30], 21);
        let rep = grad_check_tape(
            |t, v| {
                let s = t.mul(v[0], v[0])?;
                Ok(t.sum(s))
            },
            &[p],
            GradCheckOptions { max_coords: 200, ..opts() },
        )
        .unwrap();
        assert_eq!(rep.coords_checked, 200);
        assert!(rep.max_rel_error <= 1e-3);
    }
}
