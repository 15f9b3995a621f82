use std::borrow::Cow;

use super::Tensor;
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    /// `clamp(0.2x + 0.5, 0, 1)`.
    HardSigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::HardSigmoid => (0.2 * x + 0.5).clamp(0.0, 1.0),
        }
    }

    /// Derivative given the input `x` and the output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::HardSigmoid => {
                if x > -2.5 && x < 2.5 {
                    0.2
                } else {
                    0.0
                }
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    VecMat(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Act(Var, Activation),
    Abs(Var),
    Concat(Vec<Var>),
    Row(Var, usize),
    DepthwiseConv1d { x: Var, w: Var, b: Var },
    Conv1d { x: Var, w: Var, b: Var },
    MaxPoolTime { x: Var, argmax: Vec<usize> },
    MeanRows(Var),
    Sum(Var),
    Scale(Var, f64),
    SoftmaxCrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records operations in evaluation order so that gradients can be
/// replayed backwards. Parameters may be borrowed for the tape's lifetime.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, requires_grad)
    }

    /// Records a borrowed tensor as a leaf without copying it.
    pub fn leaf_ref(&mut self, value: &'a Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions disagree: {m}x{k} by {k2}x{n}"
            )));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.derived(t, Op::MatMul(a, b), &[a, b]))
    }

    /// Row vector times matrix: `[k] x [k, n] -> [n]`.
    pub fn vecmat(&mut self, x: Var, w: Var) -> Result<Var> {
        let (k, n) = self.value(w).dims2()?;
        if self.shape(x) != [k] {
            return Err(Error::Shape(format!(
                "vecmat expects a {k}-vector, got shape {:?}",
                self.shape(x)
            )));
        }
        let (xd, wd) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; n];
        for (p, &xp) in xd.iter().enumerate() {
            for (o, &wv) in out.iter_mut().zip(&wd[p * n..(p + 1) * n]) {
                *o += xp * wv;
            }
        }
        let t = Tensor::vector(out)?;
        Ok(self.derived(t, Op::VecMat(x, w), &[x, w]))
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{name}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(self.shape(a).to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "add", |x, y| x + y)?;
        Ok(self.derived(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "sub", |x, y| x - y)?;
        Ok(self.derived(t, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "mul", |x, y| x * y)?;
        Ok(self.derived(t, Op::Mul(a, b), &[a, b]))
    }

    /// Adds a bias vector along the last axis of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let n = *self.shape(x).last().expect("non-empty shape");
        if self.shape(b) != [n] {
            return Err(Error::Shape(format!(
                "bias of shape {:?} does not match last axis {n}",
                self.shape(b)
            )));
        }
        let bd = self.value(b).data();
        let data = self
            .value(x)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bd).map(|(v, bb)| v + bb))
            .collect();
        let t = Tensor::new(self.shape(x).to_vec(), data)?;
        Ok(self.derived(t, Op::AddBias(x, b), &[x, b]))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| kind.apply(v)).collect();
        let t = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        self.derived(t, Op::Act(x, kind), &[x])
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|v| v.abs()).collect();
        let t = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        self.derived(t, Op::Abs(x), &[x])
    }

    /// Flattens and concatenates the inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of nothing".into()));
        }
        let data: Vec<f64> = parts
            .iter()
            .flat_map(|v| self.value(*v).data().iter().copied())
            .collect();
        let t = Tensor::vector(data)?;
        Ok(self.derived(t, Op::Concat(parts.to_vec()), parts))
    }

    pub fn row(&mut self, x: Var, index: usize) -> Result<Var> {
        let (r, _) = self.value(x).dims2()?;
        if index >= r {
            return Err(Error::Shape(format!("row {index} out of {r}")));
        }
        let t = Tensor::vector(self.value(x).row(index).to_vec())?;
        Ok(self.derived(t, Op::Row(x, index), &[x]))
    }

    /// Valid 1-D convolution applied independently per column:
    /// `out[t, d] = b[d] + sum_j x[t + j, d] * w[j, d]`.
    pub fn depthwise_conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (l, d) = self.value(x).dims2()?;
        let (k, dw) = self.value(w).dims2()?;
        if dw != d || self.shape(b) != [d] {
            return Err(Error::Shape(format!(
                "depthwise kernel {k}x{dw} / bias {:?} do not fit input width {d}",
                self.shape(b)
            )));
        }
        if l < k {
            return Err(Error::Shape(format!(
                "sequence length {l} shorter than filter width {k}"
            )));
        }
        let t_out = l - k + 1;
        let (xd, wd, bd) = (
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let mut out = Vec::with_capacity(t_out * d);
        for t in 0..t_out {
            out.extend_from_slice(bd);
            let orow = &mut out[t * d..];
            for j in 0..k {
                let xrow = &xd[(t + j) * d..(t + j + 1) * d];
                let wrow = &wd[j * d..(j + 1) * d];
                for ((o, xv), wv) in orow.iter_mut().zip(xrow).zip(wrow) {
                    *o += xv * wv;
                }
            }
        }
        let t = Tensor::new(vec![t_out, d], out)?;
        Ok(self.derived(t, Op::DepthwiseConv1d { x, w, b }, &[x, w, b]))
    }

    /// Valid 1-D convolution with full-width filters. `w` has shape
    /// `[k * d, filters]`, row `j * d + c` holding tap `j` of input channel `c`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (l, d) = self.value(x).dims2()?;
        let (kd, f) = self.value(w).dims2()?;
        if kd % d != 0 || self.shape(b) != [f] {
            return Err(Error::Shape(format!(
                "conv kernel {kd}x{f} / bias {:?} do not fit input width {d}",
                self.shape(b)
            )));
        }
        let k = kd / d;
        if l < k {
            return Err(Error::Shape(format!(
                "sequence length {l} shorter than filter width {k}"
            )));
        }
        let t_out = l - k + 1;
        let (xd, wd, bd) = (
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let mut out = Vec::with_capacity(t_out * f);
        for t in 0..t_out {
            out.extend_from_slice(bd);
            let orow = &mut out[t * f..];
            // The window rows t..t+k are contiguous, matching w's row order.
            for (p, &xv) in xd[t * d..(t + k) * d].iter().enumerate() {
                for (o, wv) in orow.iter_mut().zip(&wd[p * f..(p + 1) * f]) {
                    *o += xv * wv;
                }
            }
        }
        let t = Tensor::new(vec![t_out, f], out)?;
        Ok(self.derived(t, Op::Conv1d { x, w, b }, &[x, w, b]))
    }

    /// Columnwise maximum over the time (row) axis. Ties go to the lowest row.
    pub fn maxpool_over_time(&mut self, x: Var) -> Result<Var> {
        let (t_len, d) = self.value(x).dims2()?;
        let xv = self.value(x);
        let mut argmax = vec![0usize; d];
        let mut out = xv.row(0).to_vec();
        for t in 1..t_len {
            for (c, &v) in xv.row(t).iter().enumerate() {
                if v > out[c] {
                    out[c] = v;
                    argmax[c] = t;
                }
            }
        }
        let t = Tensor::vector(out)?;
        Ok(self.derived(t, Op::MaxPoolTime { x, argmax }, &[x]))
    }

    /// Columnwise mean over rows.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (t_len, d) = self.value(x).dims2()?;
        let xv = self.value(x);
        let mut out = vec![0.0; d];
        for t in 0..t_len {
            for (o, v) in out.iter_mut().zip(xv.row(t)) {
                *o += v;
            }
        }
        let n = t_len as f64;
        out.iter_mut().for_each(|o| *o /= n);
        let t = Tensor::vector(out)?;
        Ok(self.derived(t, Op::MeanRows(x), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.derived(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|v| v * c).collect();
        let t = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        self.derived(t, Op::Scale(x, c), &[x])
    }

    /// `-log softmax(logits)[true class]` with a fused backward rule.
    pub fn softmax_cross_entropy(&mut self, logits: Var, onehot: &Tensor) -> Result<Var> {
        let n = self.value(logits).numel();
        if self.shape(logits) != [n] || onehot.shape() != [n] {
            return Err(Error::Shape(format!(
                "logits {:?} and one-hot {:?} must be equal-length vectors",
                self.shape(logits),
                onehot.shape()
            )));
        }
        let ones = onehot.data().iter().filter(|&&v| v == 1.0).count();
        let zeros = onehot.data().iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != n - 1 {
            return Err(Error::Validation(format!(
                "one-hot target must hold a single 1 and {} zeros: {:?}",
                n - 1,
                onehot.data()
            )));
        }
        let target = onehot.data().iter().position(|&v| v == 1.0).unwrap();
        let l = self.value(logits).data();
        let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = l.iter().map(|&v| (v - m).exp()).sum();
        let loss = m + z.ln() - l[target];
        let probs = softmax(l);
        Ok(self.derived(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            },
            &[logits],
        ))
    }

    /// Reverse sweep from a scalar `loss`. Every node is visited once, in
    /// reverse recording order; contributions from fan-out accumulate.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && grads[i].is_none() {
                grads[i] = Some(vec![0.0; node.value.numel()]);
            }
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let n = &self.nodes[v.0];
            if !n.requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n.value.numel()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).shape()[1];
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let grow = &g[i * n..(i + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += aip * gv;
                            }
                        }
                    }
                });
            }
            Op::VecMat(x, w) => {
                let n = g.len();
                let (xd, wd) = (self.value(*x).data(), self.value(*w).data());
                acc(*x, &mut |gx| {
                    for (p, o) in gx.iter_mut().enumerate() {
                        *o += wd[p * n..(p + 1) * n].iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                    }
                });
                acc(*w, &mut |gw| {
                    for (p, &xp) in xd.iter().enumerate() {
                        for (o, gv) in gw[p * n..(p + 1) * n].iter_mut().zip(g) {
                            *o += xp * gv;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(o, v)| *o -= v));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for ((o, gv), bv) in ga.iter_mut().zip(g).zip(bd) {
                        *o += gv * bv;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, gv), av) in gb.iter_mut().zip(g).zip(ad) {
                        *o += gv * av;
                    }
                });
            }
            Op::AddBias(x, b) => {
                acc(*x, &mut |gx| add_into(gx, g));
                let n = self.value(*b).numel();
                acc(*b, &mut |gb| {
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Act(x, kind) => {
                let (xd, yd) = (self.value(*x).data(), node.value.data());
                acc(*x, &mut |gx| {
                    for (((o, gv), &xv), &yv) in gx.iter_mut().zip(g).zip(xd).zip(yd) {
                        *o += gv * kind.derivative(xv, yv);
                    }
                });
            }
            Op::Abs(x) => {
                let xd = self.value(*x).data();
                acc(*x, &mut |gx| {
                    for ((o, gv), &xv) in gx.iter_mut().zip(g).zip(xd) {
                        // Subgradient 0 at the kink.
                        let s = if xv > 0.0 {
                            1.0
                        } else if xv < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *o += gv * s;
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.value(*p).numel();
                    let slice = &g[offset..offset + n];
                    acc(*p, &mut |gp| add_into(gp, slice));
                    offset += n;
                }
            }
            Op::Row(x, r) => {
                let c = g.len();
                acc(*x, &mut |gx| add_into(&mut gx[r * c..(r + 1) * c], g));
            }
            Op::DepthwiseConv1d { x, w, b } => {
                let d = self.value(*x).shape()[1];
                let k = self.value(*w).shape()[0];
                let t_out = g.len() / d;
                let (xd, wd) = (self.value(*x).data(), self.value(*w).data());
                acc(*x, &mut |gx| {
                    for t in 0..t_out {
                        for j in 0..k {
                            for c in 0..d {
                                gx[(t + j) * d + c] += g[t * d + c] * wd[j * d + c];
                            }
                        }
                    }
                });
                acc(*w, &mut |gw| {
                    for t in 0..t_out {
                        for j in 0..k {
                            for c in 0..d {
                                gw[j * d + c] += g[t * d + c] * xd[(t + j) * d + c];
                            }
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for row in g.chunks(d) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Conv1d { x, w, b } => {
                let d = self.value(*x).shape()[1];
                let (kd, f) = self.value(*w).dims2().unwrap();
                let t_out = g.len() / f;
                let (xd, wd) = (self.value(*x).data(), self.value(*w).data());
                acc(*x, &mut |gx| {
                    for t in 0..t_out {
                        let grow = &g[t * f..(t + 1) * f];
                        for p in 0..kd {
                            gx[t * d + p] += wd[p * f..(p + 1) * f]
                                .iter()
                                .zip(grow)
                                .map(|(a, b)| a * b)
                                .sum::<f64>();
                        }
                    }
                });
                acc(*w, &mut |gw| {
                    for t in 0..t_out {
                        let grow = &g[t * f..(t + 1) * f];
                        for p in 0..kd {
                            let xv = xd[t * d + p];
                            for (o, gv) in gw[p * f..(p + 1) * f].iter_mut().zip(grow) {
                                *o += xv * gv;
                            }
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for row in g.chunks(f) {
                        add_into(gb, row);
                    }
                });
            }
            Op::MaxPoolTime { x, argmax } => {
                let d = g.len();
                acc(*x, &mut |gx| {
                    for (c, &t) in argmax.iter().enumerate() {
                        gx[t * d + c] += g[c];
                    }
                });
            }
            Op::MeanRows(x) => {
                let d = g.len();
                let t_len = self.value(*x).shape()[0] as f64;
                acc(*x, &mut |gx| {
                    for row in gx.chunks_mut(d) {
                        for (o, gv) in row.iter_mut().zip(g) {
                            *o += gv / t_len;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                acc(*x, &mut |gx| gx.iter_mut().for_each(|o| *o += g[0]));
            }
            Op::Scale(x, c) => {
                acc(*x, &mut |gx| {
                    for (o, gv) in gx.iter_mut().zip(g) {
                        *o += gv * c;
                    }
                });
            }
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            } => {
                acc(*logits, &mut |gl| {
                    for (c, (o, p)) in gl.iter_mut().zip(probs).enumerate() {
                        let y = if c == *target { 1.0 } else { 0.0 };
                        *o += g[0] * (p - y);
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Gradient table produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does not
    /// depend on any tensor that requires a gradient.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn tensor(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.shapes[v.0].clone(), g.clone()).expect("shape recorded with value"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_product() {
        let mut tape = Tape::new();
        let i2 = tape.leaf(m(&[&[1.0, 0.0], &[0.0, 1.0]]), false);
        let a = tape.leaf(m(&[&[1.0, 2.0], &[3.0, 4.0]]), false);
        let b = tape.leaf(m(&[&[5.0, 6.0], &[7.0, 8.0]]), false);
        let ia = tape.matmul(i2, a).unwrap();
        assert_eq!(tape.value(ia).data(), &[1.0, 2.0, 3.0, 4.0]);
        let ab = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(ab).data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 3]).unwrap(), false);
        let b = tape.leaf(Tensor::zeros(&[4, 2]).unwrap(), false);
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape(_))));
    }

    fn column(values: &[f64]) -> Tensor {
        Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn depthwise_conv_hand_cases() {
        let mut tape = Tape::new();
        let x = tape.leaf(column(&[1.0, 2.0, 3.0, 4.0]), false);
        let b = tape.leaf(Tensor::vector(vec![0.0]).unwrap(), false);
        let mid = tape.leaf(column(&[0.0, 1.0, 0.0]), false);
        let diff = tape.leaf(column(&[1.0, 0.0, -1.0]), false);
        let y = tape.depthwise_conv1d(x, mid, b).unwrap();
        assert_eq!(tape.value(y).data(), &[2.0, 3.0]);
        let y = tape.depthwise_conv1d(x, diff, b).unwrap();
        assert_eq!(tape.value(y).data(), &[-2.0, -2.0]);
    }

    #[test]
    fn depthwise_conv_shapes() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[40, 300]).unwrap(), false);
        let w = tape.leaf(Tensor::zeros(&[3, 300]).unwrap(), false);
        let b = tape.leaf(Tensor::zeros(&[300]).unwrap(), false);
        let y = tape.depthwise_conv1d(x, w, b).unwrap();
        assert_eq!(tape.value(y).shape(), &[38, 300]);
        let short = tape.leaf(Tensor::zeros(&[2, 300]).unwrap(), false);
        assert!(matches!(tape.depthwise_conv1d(short, w, b), Err(Error::Shape(_))));
    }

    #[test]
    fn maxpool_picks_column_max_and_routes_gradient_to_first_max() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[&[-2.0, 1.0], &[5.0, 1.0], &[3.0, 0.0]]), true);
        let y = tape.maxpool_over_time(x).unwrap();
        assert_eq!(tape.value(y).data(), &[5.0, 1.0]);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        // Column 1 ties between rows 0 and 1: lowest index wins.
        assert_eq!(g.get(x).unwrap(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_of_identical_rows_is_the_row() {
        let mut tape = Tape::new();
        let row = [0.5, -1.0, 2.0];
        let x = tape.leaf(m(&[&row, &row, &row]), false);
        let y = tape.maxpool_over_time(x).unwrap();
        assert_eq!(tape.value(y).data(), &row);
    }

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::HardSigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::HardSigmoid.apply(3.0), 1.0);
        assert_eq!(Activation::HardSigmoid.apply(-3.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    }

    fn ce(logits: Vec<f64>, class: usize) -> f64 {
        let mut tape = Tape::new();
        let l = tape.leaf(Tensor::vector(logits).unwrap(), false);
        let mut oh = vec![0.0; 4];
        oh[class] = 1.0;
        let loss = tape
            .softmax_cross_entropy(l, &Tensor::vector(oh).unwrap())
            .unwrap();
        tape.value(loss).data()[0]
    }

    #[test]
    fn cross_entropy_closed_forms() {
        assert!((ce(vec![0.0; 4], 2) - 4f64.ln()).abs() < 1e-15);
        assert!(ce(vec![0.0, 0.0, 0.0, 100.0], 3) <= 1e-6);
        assert!((ce(vec![0.0, 0.0, 0.0, 3f64.ln()], 3) - 2f64.ln()).abs() < 1e-15);
        let p = softmax(&[0.0, 0.0, 0.0, 3f64.ln()]);
        for (a, b) in p.iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_rejects_bad_onehot() {
        let mut tape = Tape::new();
        let l = tape.leaf(Tensor::vector(vec![0.0; 4]).unwrap(), false);
        for bad in [vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0]] {
            let oh = Tensor::vector(bad).unwrap();
            assert!(matches!(
                tape.softmax_cross_entropy(l, &oh),
                Err(Error::Validation(_))
            ));
        }
    }

    #[test]
    fn backward_hand_cases() {
        // sum(x^2) at [1,2,3]
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap(), true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap(), &[2.0, 4.0, 6.0]);

        // disconnected input gets a zero gradient
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap(), true);
        let c = tape.leaf(Tensor::scalar(5.0), false);
        let loss = tape.sum(c);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap(), &[0.0, 0.0]);

        // fan-out accumulates
        let mut tape = Tape::new();
        let y = tape.leaf(Tensor::scalar(0.7), true);
        let loss = tape.add(y, y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(y).unwrap(), &[2.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap(), true);
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }
}
