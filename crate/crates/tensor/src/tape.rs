//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value. [`Tape::backward`]
//! walks the nodes in reverse and accumulates vector-Jacobian products into the
//! inputs that require a gradient. Constants never receive gradients, and no
//! work is done for branches that only lead to constants.

use crate::error::{dim_err, Result, TensorError};
use crate::kernels::{self, ChannelStats, ConvGeometry, Need};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f32 = 1e-7;

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeometry },
    ConvTranspose2d { input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeometry },
    Linear { input: Var, weights: Var, bias: Option<Var> },
    Relu(Var),
    Sigmoid(Var),
    Norm { input: Var, gamma: Var, beta: Var, stats: ChannelStats, eps: f32, batch_stats: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    Square(Var),
    Sum(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Crop { input: Var, offsets: Vec<(usize, usize)>, height: usize, width: usize },
    Bce { input: Var, targets: Vec<f32> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f32>>>,
}

impl Gradients {
    /// `None` when `var` does not require a gradient or the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<&[f32]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `var`, zero-filled when the loss does not reach it.
    pub fn get_or_zero(&self, var: Var, len: usize) -> Vec<f32> {
        self.get(var).map_or_else(|| vec![0.0; len], <[f32]>::to_vec)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.requires_grad(v))
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.clear_grad();
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.clear_grad();
        self.push(value, Op::Leaf, false)
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeometry) -> Result<Var> {
        let out = kernels::conv2d(
            self.value(input),
            self.value(kernel),
            bias.map(|b| self.value(b)),
            geom,
        )?;
        let rg = self.any_grad(&[input, kernel]) || bias.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(out, Op::Conv2d { input, kernel, bias, geom }, rg))
    }

    pub fn conv2d_transpose(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: ConvGeometry,
    ) -> Result<Var> {
        let out = kernels::conv2d_transpose(
            self.value(input),
            self.value(kernel),
            bias.map(|b| self.value(b)),
            geom,
        )?;
        let rg = self.any_grad(&[input, kernel]) || bias.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(out, Op::ConvTranspose2d { input, kernel, bias, geom }, rg))
    }

    pub fn linear(&mut self, input: Var, weights: Var, bias: Option<Var>) -> Result<Var> {
        let out = kernels::fully_connected(
            self.value(input),
            self.value(weights),
            bias.map(|b| self.value(b)),
        )?;
        let rg = self.any_grad(&[input, weights]) || bias.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(out, Op::Linear { input, weights, bias }, rg))
    }

    fn map(&mut self, input: Var, f: impl Fn(f32) -> f32) -> Tensor {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| f(v)).collect();
        Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = self.map(input, kernels::relu);
        let rg = self.requires_grad(input);
        self.push(out, Op::Relu(input), rg)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let out = self.map(input, kernels::sigmoid);
        let rg = self.requires_grad(input);
        self.push(out, Op::Sigmoid(input), rg)
    }

    /// Per-channel normalization with statistics of the current batch.
    /// Returns the output and the statistics used, for running-average bookkeeping.
    pub fn batch_norm_train(&mut self, input: Var, gamma: Var, beta: Var, eps: f32) -> Result<(Var, ChannelStats)> {
        let stats = kernels::channel_stats(self.value(input))?;
        let var = self.normalize(input, gamma, beta, stats.clone(), eps, true)?;
        Ok((var, stats))
    }

    /// Per-channel normalization with fixed (running) statistics.
    pub fn batch_norm_eval(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: ChannelStats,
        eps: f32,
    ) -> Result<Var> {
        self.normalize(input, gamma, beta, stats, eps, false)
    }

    fn normalize(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: ChannelStats,
        eps: f32,
        batch_stats: bool,
    ) -> Result<Var> {
        let out = kernels::channel_normalize(
            self.value(input),
            &stats,
            self.value(gamma),
            self.value(beta),
            eps,
        )?;
        let rg = self.any_grad(&[input, gamma, beta]);
        Ok(self.push(out, Op::Norm { input, gamma, beta, stats, eps, batch_stats }, rg))
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return dim_err(format!("{what} of {:?} and {:?}", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip(a, b, "add", |p, q| p + q)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip(a, b, "sub", |p, q| p - q)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip(a, b, "mul", |p, q| p * q)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, input: Var, factor: f32) -> Var {
        let out = self.map(input, |v| v * factor);
        let rg = self.requires_grad(input);
        self.push(out, Op::Scale(input, factor), rg)
    }

    pub fn square(&mut self, input: Var) -> Var {
        let out = self.map(input, |v| v * v);
        let rg = self.requires_grad(input);
        self.push(out, Op::Square(input), rg)
    }

    /// Sum of all elements, accumulated in `f64`, as a `[1]` tensor.
    pub fn sum(&mut self, input: Var) -> Var {
        let total: f64 = self.value(input).data().iter().map(|&v| v as f64).sum();
        let rg = self.requires_grad(input);
        self.push(Tensor::scalar(total as f32), Op::Sum(input), rg)
    }

    /// Concatenation along axis 1 of tensors that agree on every other axis.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return dim_err("concat of zero tensors");
        };
        let base = self.value(first).shape().to_vec();
        if base.len() < 2 {
            return dim_err("concat needs rank >= 2");
        }
        let n = base[0];
        let inner: usize = base[2..].iter().product();
        let mut width = 0;
        for &v in inputs {
            let s = self.value(v).shape();
            if s.len() != base.len() || s[0] != n || s[2..] != base[2..] {
                return dim_err(format!("concat of {base:?} and {s:?}"));
            }
            width += s[1];
        }
        let mut data = Vec::with_capacity(n * width * inner);
        for sample in 0..n {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[1] * inner;
                data.extend_from_slice(&t.data()[sample * chunk..(sample + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[1] = width;
        let out = Tensor::new(shape, data)?;
        let rg = self.any_grad(inputs);
        Ok(self.push(out, Op::Concat(inputs.to_vec()), rg))
    }

    pub fn reshape(&mut self, input: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let out = self.value(input).clone().reshape(shape)?;
        let rg = self.requires_grad(input);
        Ok(self.push(out, Op::Reshape(input), rg))
    }

    /// Per-sample spatial window `[row, row + height) x [col, col + width)` of a `[N, C, H, W]` tensor.
    pub fn crop(&mut self, input: Var, offsets: &[(usize, usize)], height: usize, width: usize) -> Result<Var> {
        let x = self.value(input);
        let [n, c, h, w] = x.dims4("crop input")?;
        if offsets.len() != n {
            return dim_err(format!("{} crop offsets for a batch of {n}", offsets.len()));
        }
        if offsets.iter().any(|&(r, q)| r + height > h || q + width > w) || height == 0 || width == 0 {
            return dim_err(format!("crop {height}x{width} outside {h}x{w}"));
        }
        let mut data = Vec::with_capacity(n * c * height * width);
        for (s, &(r0, c0)) in offsets.iter().enumerate() {
            for ch in 0..c {
                let plane = &x.data()[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                for r in r0..r0 + height {
                    data.extend_from_slice(&plane[r * w + c0..r * w + c0 + width]);
                }
            }
        }
        let out = Tensor::new([n, c, height, width], data)?;
        let rg = self.requires_grad(input);
        Ok(self.push(out, Op::Crop { input, offsets: offsets.to_vec(), height, width }, rg))
    }

    /// Mean binary cross-entropy `-[t ln p + (1 - t) ln(1 - p)]` of probabilities
    /// against targets, with `p` clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub fn bce(&mut self, input: Var, targets: &[f32]) -> Result<Var> {
        let p = self.value(input);
        if p.numel() != targets.len() {
            return dim_err(format!("{} targets for {} probabilities", targets.len(), p.numel()));
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(targets)
            .map(|(&p, &t)| {
                let q = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP) as f64;
                -(t as f64 * q.ln() + (1.0 - t as f64) * (1.0 - q).ln())
            })
            .sum();
        let out = Tensor::scalar((total / targets.len() as f64) as f32);
        let rg = self.requires_grad(input);
        Ok(self.push(out, Op::Bce { input, targets: targets.to_vec() }, rg))
    }

    /// Differentiates the scalar `loss` with respect to every node that requires a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(TensorError::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        if !self.requires_grad(loss) {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f32>>], var: Var, delta: Vec<f32>) {
        if !self.requires_grad(var) {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
            slot => *slot = Some(delta),
        }
    }

    fn need(&self, input: Var, weights: Var, bias: Option<Var>) -> Need {
        Need {
            input: self.requires_grad(input),
            kernel: self.requires_grad(weights),
            bias: bias.is_some_and(|b| self.requires_grad(b)),
        }
    }

    fn propagate(&self, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            &Op::Conv2d { input, kernel, bias, geom } => {
                let need = self.need(input, kernel, bias);
                let r = kernels::conv2d_backward(self.value(input), self.value(kernel), geom, g, need)?;
                self.scatter_triplet(grads, input, kernel, bias, r);
            }
            &Op::ConvTranspose2d { input, kernel, bias, geom } => {
                let need = self.need(input, kernel, bias);
                let r = kernels::conv2d_transpose_backward(self.value(input), self.value(kernel), geom, g, need)?;
                self.scatter_triplet(grads, input, kernel, bias, r);
            }
            &Op::Linear { input, weights, bias } => {
                let need = self.need(input, weights, bias);
                let r = kernels::fully_connected_backward(self.value(input), self.value(weights), g, need)?;
                self.scatter_triplet(grads, input, weights, bias, r);
            }
            &Op::Relu(input) => {
                let d = self.value(input).data().iter().zip(g).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 }).collect();
                self.accumulate(grads, input, d);
            }
            &Op::Sigmoid(input) => {
                let d = node.value.data().iter().zip(g).map(|(&y, &g)| g * y * (1.0 - y)).collect();
                self.accumulate(grads, input, d);
            }
            Op::Norm { input, gamma, beta, stats, eps, batch_stats } => {
                let need = self.need(*input, *gamma, Some(*beta));
                let r = kernels::channel_normalize_backward(
                    self.value(*input),
                    stats,
                    self.value(*gamma),
                    *eps,
                    g,
                    *batch_stats,
                    need,
                )?;
                self.scatter_triplet(grads, *input, *gamma, Some(*beta), r);
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, g.to_vec());
                self.accumulate(grads, b, g.to_vec());
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, g.to_vec());
                self.accumulate(grads, b, g.iter().map(|v| -v).collect());
            }
            &Op::Mul(a, b) => {
                if self.requires_grad(a) {
                    let d = self.value(b).data().iter().zip(g).map(|(&y, &g)| g * y).collect();
                    self.accumulate(grads, a, d);
                }
                if self.requires_grad(b) {
                    let d = self.value(a).data().iter().zip(g).map(|(&x, &g)| g * x).collect();
                    self.accumulate(grads, b, d);
                }
            }
            &Op::Scale(input, factor) => {
                self.accumulate(grads, input, g.iter().map(|v| v * factor).collect());
            }
            &Op::Square(input) => {
                let d = self.value(input).data().iter().zip(g).map(|(&x, &g)| 2.0 * x * g).collect();
                self.accumulate(grads, input, d);
            }
            &Op::Sum(input) => {
                self.accumulate(grads, input, vec![g[0]; self.value(input).numel()]);
            }
            Op::Concat(inputs) => {
                let shape = node.value.shape();
                let (n, inner) = (shape[0], shape[2..].iter().product::<usize>());
                let total = shape[1] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = self.value(v).shape()[1] * inner;
                    if self.requires_grad(v) {
                        let mut d = Vec::with_capacity(n * chunk);
                        for s in 0..n {
                            d.extend_from_slice(&g[s * total + offset..s * total + offset + chunk]);
                        }
                        self.accumulate(grads, v, d);
                    }
                    offset += chunk;
                }
            }
            &Op::Reshape(input) => self.accumulate(grads, input, g.to_vec()),
            Op::Crop { input, offsets, height, width } => {
                let [n, c, h, w] = self.value(*input).dims4("crop input")?;
                let mut d = vec![0.0f32; n * c * h * w];
                let mut src = g.chunks(*width);
                for (s, &(r0, c0)) in offsets.iter().enumerate() {
                    for ch in 0..c {
                        let plane = &mut d[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                        for r in r0..r0 + height {
                            let row = src.next().expect("crop gradient length");
                            plane[r * w + c0..r * w + c0 + width].copy_from_slice(row);
                        }
                    }
                }
                self.accumulate(grads, *input, d);
            }
            Op::Bce { input, targets } => {
                let scale = g[0] / targets.len() as f32;
                let d = self
                    .value(*input)
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&p, &t)| {
                        if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
                            return 0.0;
                        }
                        let (p, t) = (p as f64, t as f64);
                        (scale as f64 * (-(t / p) + (1.0 - t) / (1.0 - p))) as f32
                    })
                    .collect();
                self.accumulate(grads, *input, d);
            }
        }
        Ok(())
    }

    fn scatter_triplet(
        &self,
        grads: &mut [Option<Vec<f32>>],
        input: Var,
        weights: Var,
        bias: Option<Var>,
        r: kernels::ConvGrads,
    ) {
        if let Some(d) = r.input {
            self.accumulate(grads, input, d);
        }
        if let Some(d) = r.kernel {
            self.accumulate(grads, weights, d);
        }
        if let (Some(b), Some(d)) = (bias, r.bias) {
            self.accumulate(grads, b, d);
        }
    }
}
