//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only list of nodes. Every operation evaluates
//! eagerly, stores what its backward rule needs, and returns a [`Var`] handle.
//! [`Graph::backward`] walks the nodes in exact reverse creation order and
//! accumulates gradients into the leaves created with [`Graph::param`].
//! Leaf gradients persist across calls until [`Graph::zero_grad`].

use crate::conv::{correlate, correlate_adjoint, correlate_kernel_grad, ConvGeometry, Dims};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => {
                // Split on sign so exp never overflows.
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative expressed through input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Per-channel statistics of one normalization call: `(mean, variance)`
/// with the biased variance used for normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Number of values each channel's statistics were computed over.
    pub count: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    Activation {
        input: Var,
        kind: Activation,
    },
    /// Normalization over groups of positions sharing a channel. Instance
    /// norm groups by (sample, channel), batch norm by channel only.
    Normalize {
        input: Var,
        gain: Var,
        shift: Var,
        per_instance: bool,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    /// Batch norm with frozen statistics.
    FrozenNormalize {
        input: Var,
        gain: Var,
        shift: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Reshape {
        input: Var,
    },
    Dense {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Abs(Var),
    Ln(Var),
    Clamp {
        input: Var,
        lo: f64,
        hi: f64,
    },
    Sum(Var),
    Mean(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvTranspose2d { .. } => "conv_transpose2d",
            Op::Activation { .. } => "activation",
            Op::Normalize { per_instance: true, .. } => "instance_norm",
            Op::Normalize { per_instance: false, .. } => "batch_norm",
            Op::FrozenNormalize { .. } => "batch_norm_eval",
            Op::Reshape { .. } => "reshape",
            Op::Dense { .. } => "dense",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Abs(..) => "abs",
            Op::Ln(..) => "ln",
            Op::Clamp { .. } => "clamp",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernel, bias, .. } | Op::ConvTranspose2d { input, kernel, bias, .. } => {
                vec![input, kernel, bias]
            }
            Op::Normalize { input, gain, shift, .. } | Op::FrozenNormalize { input, gain, shift, .. } => {
                vec![input, gain, shift]
            }
            Op::Dense { input, weights, bias } => vec![input, weights, bias],
            Op::Activation { input, .. } | Op::Reshape { input } | Op::Clamp { input, .. } => vec![input],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::Scale(a, _) | Op::AddScalar(a) | Op::Abs(a) | Op::Ln(a) | Op::Sum(a) | Op::Mean(a) => vec![a],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// One entry of [`Graph::trace`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub op: &'static str,
    pub inputs: Vec<usize>,
    pub shape: Vec<usize>,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, requires_grad)
    }

    /// Smallest distance from any input of a piecewise-linear node (ReLU,
    /// LeakyReLU, abs, clamp) to one of its breakpoints; infinite when the
    /// graph has none. Finite differences are unreliable closer than this.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        let mut scan = |input: Var, points: &[f64]| {
            for &v in self.nodes[input.0].value.data() {
                for &p in points {
                    margin = margin.min((v - p).abs());
                }
            }
        };
        for node in &self.nodes {
            match node.op {
                Op::Activation {
                    input,
                    kind: Activation::Relu | Activation::LeakyRelu(_),
                } => scan(input, &[0.0]),
                Op::Abs(input) => scan(input, &[0.0]),
                Op::Clamp { input, lo, hi } => scan(input, &[lo, hi]),
                _ => {}
            }
        }
        margin
    }

    /// Leaf that does not receive gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf whose gradient is accumulated by [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of a leaf, or zeros of the leaf's shape.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.value(v).shape()))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Operation kinds, inputs and output shapes in creation order.
    pub fn trace(&self) -> Vec<TraceEntry> {
        self.nodes
            .iter()
            .map(|n| TraceEntry {
                op: n.op.name(),
                inputs: n.op.inputs().into_iter().map(Var::index).collect(),
                shape: n.value.shape().to_vec(),
            })
            .collect()
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, geom: ConvGeometry) -> Result<Var> {
        let xd = Dims::from_shape(self.value(input).shape())?;
        let (kh, kw, a, b) = self.kernel_dims(kernel)?;
        if (kh, kw) != geom.kernel {
            return Err(Error::dim(format!("kernel is {kh}x{kw} but geometry says {:?}", geom.kernel)));
        }
        if a != xd.c {
            return Err(Error::dim(format!("kernel expects {a} input channels, input has {}", xd.c)));
        }
        self.check_bias(bias, b)?;
        let (oh, ow) = geom.output_size(xd.h, xd.w)?;
        let mut y = correlate(self.value(input).data(), xd, self.value(kernel).data(), b, &geom, (oh, ow));
        add_channel_bias(&mut y, self.value(bias).data());
        let value = Tensor::new(vec![xd.n, oh, ow, b], y)?;
        Ok(self.push_op(value, Op::Conv2d { input, kernel, bias, geom }))
    }

    /// Transposed convolution: the adjoint of [`Graph::conv2d`] in its input.
    ///
    /// The kernel has shape `[kh, kw, C_out, C_in]`, i.e. it is the kernel of
    /// the forward convolution mapping `C_out` channels to `C_in`.
    pub fn conv_transpose2d(&mut self, input: Var, kernel: Var, bias: Var, geom: ConvGeometry) -> Result<Var> {
        let xd = Dims::from_shape(self.value(input).shape())?;
        let (kh, kw, out_c, in_c) = self.kernel_dims(kernel)?;
        if (kh, kw) != geom.kernel {
            return Err(Error::dim(format!("kernel is {kh}x{kw} but geometry says {:?}", geom.kernel)));
        }
        if in_c != xd.c {
            return Err(Error::dim(format!(
                "transposed kernel expects {in_c} input channels, input has {}",
                xd.c
            )));
        }
        self.check_bias(bias, out_c)?;
        let (oh, ow) = geom.transposed_output_size(xd.h, xd.w)?;
        let mut y = correlate_adjoint(self.value(input).data(), xd, self.value(kernel).data(), out_c, &geom, (oh, ow));
        add_channel_bias(&mut y, self.value(bias).data());
        let value = Tensor::new(vec![xd.n, oh, ow, out_c], y)?;
        Ok(self.push_op(value, Op::ConvTranspose2d { input, kernel, bias, geom }))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let value = self.value(input).map(|x| kind.apply(x));
        self.push_op(value, Op::Activation { input, kind })
    }

    pub fn relu(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Var {
        self.activation(input, Activation::LeakyRelu(slope))
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    /// Instance normalization of a `[N, H, W, C]` tensor: every (sample,
    /// channel) plane is standardized, then scaled by `gain` and offset by
    /// `shift`.
    pub fn instance_norm(&mut self, input: Var, gain: Var, shift: Var, eps: f64) -> Result<Var> {
        self.normalize(input, gain, shift, eps, true).map(|(v, _)| v)
    }

    /// Batch normalization with batch statistics (training mode). Returns
    /// the statistics so the caller can maintain running averages.
    pub fn batch_norm_train(&mut self, input: Var, gain: Var, shift: Var, eps: f64) -> Result<(Var, ChannelStats)> {
        let n = self.value(input).shape()[0];
        if n < 2 {
            return Err(Error::config("batch normalization in training mode needs a batch of at least 2"));
        }
        self.normalize(input, gain, shift, eps, false)
    }

    /// Batch normalization with fixed statistics (evaluation mode).
    pub fn batch_norm_eval(&mut self, input: Var, gain: Var, shift: Var, mean: &[f64], var: &[f64], eps: f64) -> Result<Var> {
        let d = self.spatial_or_flat_dims(input)?;
        self.check_bias(gain, d.c)?;
        self.check_bias(shift, d.c)?;
        if mean.len() != d.c || var.len() != d.c {
            return Err(Error::dim("running statistics do not match channel count"));
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let x = self.value(input).data();
        let gv = self.value(gain).data();
        let sv = self.value(shift).data();
        let mut normalized = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for (i, &xv) in x.iter().enumerate() {
            let c = i % d.c;
            let xh = (xv - mean[c]) * inv_std[c];
            normalized[i] = xh;
            y[i] = gv[c] * xh + sv[c];
        }
        let value = Tensor::new(self.value(input).shape().to_vec(), y)?;
        Ok(self.push_op(
            value,
            Op::FrozenNormalize {
                input,
                gain,
                shift,
                normalized,
                inv_std,
            },
        ))
    }

    fn normalize(&mut self, input: Var, gain: Var, shift: Var, eps: f64, per_instance: bool) -> Result<(Var, ChannelStats)> {
        let d = self.spatial_or_flat_dims(input)?;
        self.check_bias(gain, d.c)?;
        self.check_bias(shift, d.c)?;
        let x = self.value(input).data();
        let plane = d.h * d.w;
        let groups = if per_instance { d.n * d.c } else { d.c };
        let count = if per_instance { plane } else { d.n * plane };
        let group_of = |i: usize| {
            let c = i % d.c;
            if per_instance {
                (i / (plane * d.c)) * d.c + c
            } else {
                c
            }
        };
        let mut mean = vec![0.0; groups];
        for (i, &xv) in x.iter().enumerate() {
            mean[group_of(i)] += xv;
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; groups];
        for (i, &xv) in x.iter().enumerate() {
            let g = group_of(i);
            var[g] += (xv - mean[g]).powi(2);
        }
        var.iter_mut().for_each(|v| *v /= count as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let gv = self.value(gain).data();
        let sv = self.value(shift).data();
        let mut normalized = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for (i, &xv) in x.iter().enumerate() {
            let g = group_of(i);
            let c = i % d.c;
            let xh = (xv - mean[g]) * inv_std[g];
            normalized[i] = xh;
            y[i] = gv[c] * xh + sv[c];
        }
        let value = Tensor::new(self.value(input).shape().to_vec(), y)?;
        let stats = ChannelStats { mean, var, count };
        let v = self.push_op(
            value,
            Op::Normalize {
                input,
                gain,
                shift,
                per_instance,
                normalized,
                inv_std,
            },
        );
        Ok((v, stats))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        Ok(self.push_op(value, Op::Reshape { input }))
    }

    /// `[N, n] × [n, m] + [m] → [N, m]`.
    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let (batch, n) = match *self.value(input).shape() {
            [batch, n] => (batch, n),
            ref s => return Err(Error::dim(format!("dense input must be [N, n], got {s:?}"))),
        };
        let (wn, m) = match *self.value(weights).shape() {
            [wn, m] => (wn, m),
            ref s => return Err(Error::dim(format!("dense weights must be [n, m], got {s:?}"))),
        };
        if wn != n {
            return Err(Error::dim(format!("dense weights expect {wn} inputs, got {n}")));
        }
        self.check_bias(bias, m)?;
        let x = self.value(input).data();
        let w = self.value(weights).data();
        let b = self.value(bias).data();
        let mut y = vec![0.0; batch * m];
        for r in 0..batch {
            let row = &mut y[r * m..(r + 1) * m];
            row.copy_from_slice(b);
            for i in 0..n {
                let xv = x[r * n + i];
                for (yv, wv) in row.iter_mut().zip(&w[i * m..(i + 1) * m]) {
                    *yv += xv * wv;
                }
            }
        }
        let value = Tensor::new(vec![batch, m], y)?;
        Ok(self.push_op(value, Op::Dense { input, weights, bias }))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim(format!("{} of {:?} and {:?}", op.name(), av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push_op(value, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push_op(value, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Var {
        let value = self.value(a).map(|x| x + offset);
        self.push_op(value, Op::AddScalar(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::abs);
        self.push_op(value, Op::Abs(a))
    }

    /// Natural logarithm; callers clamp the argument away from zero.
    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        self.push_op(value, Op::Ln(a))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, input: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(input).map(|x| x.clamp(lo, hi));
        self.push_op(value, Op::Clamp { input, lo, hi })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push_op(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push_op(Tensor::scalar(m), Op::Mean(a))
    }

    /// Mean absolute difference over all elements.
    pub fn l1_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let d = self.abs(d);
        Ok(self.mean(d))
    }

    fn kernel_dims(&self, kernel: Var) -> Result<(usize, usize, usize, usize)> {
        match *self.value(kernel).shape() {
            [kh, kw, a, b] => Ok((kh, kw, a, b)),
            ref s => Err(Error::dim(format!("kernel must be [kh, kw, A, B], got {s:?}"))),
        }
    }

    fn check_bias(&self, v: Var, channels: usize) -> Result<()> {
        let s = self.value(v).shape();
        if s != [channels] {
            return Err(Error::dim(format!("per-channel vector must be [{channels}], got {s:?}")));
        }
        Ok(())
    }

    /// `[N, H, W, C]` as is, `[N, C]` as `H = W = 1`.
    fn spatial_or_flat_dims(&self, v: Var) -> Result<Dims> {
        match *self.value(v).shape() {
            [n, h, w, c] => Ok(Dims { n, h, w, c }),
            [n, c] => Ok(Dims { n, h: 1, w: 1, c }),
            ref s => Err(Error::dim(format!("normalization input must be [N,H,W,C] or [N,C], got {s:?}"))),
        }
    }

    /// Back-propagates from a scalar node and accumulates into leaf
    /// gradients. Two calls without [`Graph::zero_grad`] double them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut pending: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        pending[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(gy) = pending[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                match &mut self.grads[id] {
                    Some(acc) => acc.add_assign(&gy),
                    slot @ None => *slot = Some(Tensor::new(node.value.shape().to_vec(), gy)?),
                }
                continue;
            }
            for (input, g) in self.input_grads(id, &gy)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut pending[input.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    /// Gradients of node `id`'s inputs given the gradient `gy` of its output.
    /// Inputs that do not require gradients may be skipped.
    fn input_grads(&self, id: usize, gy: &[f64]) -> Result<Vec<(Var, Vec<f64>)>> {
        let node = &self.nodes[id];
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let val = |v: Var| self.nodes[v.0].value.data();
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            &Op::Conv2d { input, kernel, bias, geom } => {
                let xd = Dims::from_shape(self.value(input).shape())?;
                let yd = Dims::from_shape(node.value.shape())?;
                if needs(input) {
                    out.push((input, correlate_adjoint(gy, yd, val(kernel), xd.c, &geom, (xd.h, xd.w))));
                }
                if needs(kernel) {
                    out.push((kernel, correlate_kernel_grad(val(input), xd, gy, yd, &geom)));
                }
                if needs(bias) {
                    out.push((bias, channel_sums(gy, yd.c)));
                }
            }
            &Op::ConvTranspose2d { input, kernel, bias, geom } => {
                let xd = Dims::from_shape(self.value(input).shape())?;
                let yd = Dims::from_shape(node.value.shape())?;
                if needs(input) {
                    out.push((input, correlate(gy, yd, val(kernel), xd.c, &geom, (xd.h, xd.w))));
                }
                if needs(kernel) {
                    out.push((kernel, correlate_kernel_grad(gy, yd, val(input), xd, &geom)));
                }
                if needs(bias) {
                    out.push((bias, channel_sums(gy, yd.c)));
                }
            }
            &Op::Activation { input, kind } => {
                let g = val(input)
                    .iter()
                    .zip(node.value.data())
                    .zip(gy)
                    .map(|((&x, &y), &g)| g * kind.derivative(x, y))
                    .collect();
                out.push((input, g));
            }
            Op::Normalize {
                input,
                gain,
                shift,
                per_instance,
                normalized,
                inv_std,
            } => {
                let d = self.spatial_or_flat_dims(*input)?;
                let plane = d.h * d.w;
                let (groups, count) = if *per_instance { (d.n * d.c, plane) } else { (d.c, d.n * plane) };
                let group_of = |i: usize| {
                    let c = i % d.c;
                    if *per_instance {
                        (i / (plane * d.c)) * d.c + c
                    } else {
                        c
                    }
                };
                let gain_v = val(*gain);
                let mut sum_g = vec![0.0; groups];
                let mut sum_gx = vec![0.0; groups];
                let mut d_gain = vec![0.0; d.c];
                let mut d_shift = vec![0.0; d.c];
                for (i, (&g, &xh)) in gy.iter().zip(normalized).enumerate() {
                    let c = i % d.c;
                    let grp = group_of(i);
                    let gxh = g * gain_v[c];
                    sum_g[grp] += gxh;
                    sum_gx[grp] += gxh * xh;
                    d_gain[c] += g * xh;
                    d_shift[c] += g;
                }
                if needs(*input) {
                    let m = count as f64;
                    let gx = gy
                        .iter()
                        .zip(normalized)
                        .enumerate()
                        .map(|(i, (&g, &xh))| {
                            let c = i % d.c;
                            let grp = group_of(i);
                            inv_std[grp] / m * (m * g * gain_v[c] - sum_g[grp] - xh * sum_gx[grp])
                        })
                        .collect();
                    out.push((*input, gx));
                }
                out.push((*gain, d_gain));
                out.push((*shift, d_shift));
            }
            Op::FrozenNormalize {
                input,
                gain,
                shift,
                normalized,
                inv_std,
            } => {
                let c_n = inv_std.len();
                let gain_v = val(*gain);
                let mut d_gain = vec![0.0; c_n];
                let mut d_shift = vec![0.0; c_n];
                for (i, (&g, &xh)) in gy.iter().zip(normalized).enumerate() {
                    d_gain[i % c_n] += g * xh;
                    d_shift[i % c_n] += g;
                }
                if needs(*input) {
                    let gx = gy.iter().enumerate().map(|(i, &g)| g * gain_v[i % c_n] * inv_std[i % c_n]).collect();
                    out.push((*input, gx));
                }
                out.push((*gain, d_gain));
                out.push((*shift, d_shift));
            }
            &Op::Reshape { input } => out.push((input, gy.to_vec())),
            &Op::Dense { input, weights, bias } => {
                let (batch, n) = (self.value(input).shape()[0], self.value(input).shape()[1]);
                let m = self.value(weights).shape()[1];
                let x = val(input);
                let w = val(weights);
                if needs(input) {
                    let mut gx = vec![0.0; batch * n];
                    for r in 0..batch {
                        let grow = &gy[r * m..(r + 1) * m];
                        for i in 0..n {
                            gx[r * n + i] = w[i * m..(i + 1) * m].iter().zip(grow).map(|(a, b)| a * b).sum();
                        }
                    }
                    out.push((input, gx));
                }
                if needs(weights) {
                    let mut gw = vec![0.0; n * m];
                    for r in 0..batch {
                        let grow = &gy[r * m..(r + 1) * m];
                        for i in 0..n {
                            let xv = x[r * n + i];
                            for (gwv, g) in gw[i * m..(i + 1) * m].iter_mut().zip(grow) {
                                *gwv += xv * g;
                            }
                        }
                    }
                    out.push((weights, gw));
                }
                if needs(bias) {
                    out.push((bias, channel_sums(gy, m)));
                }
            }
            &Op::Add(a, b) => {
                out.push((a, gy.to_vec()));
                out.push((b, gy.to_vec()));
            }
            &Op::Sub(a, b) => {
                out.push((a, gy.to_vec()));
                out.push((b, gy.iter().map(|g| -g).collect()));
            }
            &Op::Mul(a, b) => {
                out.push((a, gy.iter().zip(val(b)).map(|(g, y)| g * y).collect()));
                out.push((b, gy.iter().zip(val(a)).map(|(g, x)| g * x).collect()));
            }
            &Op::Scale(a, f) => out.push((a, gy.iter().map(|g| g * f).collect())),
            &Op::AddScalar(a) => out.push((a, gy.to_vec())),
            &Op::Abs(a) => out.push((a, gy.iter().zip(val(a)).map(|(g, &x)| g * sign(x)).collect())),
            &Op::Ln(a) => out.push((a, gy.iter().zip(val(a)).map(|(g, x)| g / x).collect())),
            &Op::Clamp { input, lo, hi } => {
                let g = gy
                    .iter()
                    .zip(val(input))
                    .map(|(&g, &x)| if x >= lo && x <= hi { g } else { 0.0 })
                    .collect();
                out.push((input, g));
            }
            &Op::Sum(a) => out.push((a, vec![gy[0]; self.value(a).len()])),
            &Op::Mean(a) => {
                let n = self.value(a).len();
                out.push((a, vec![gy[0] / n as f64; n]));
            }
        }
        Ok(out)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn add_channel_bias(y: &mut [f64], bias: &[f64]) {
    let c = bias.len();
    for (i, v) in y.iter_mut().enumerate() {
        *v += bias[i % c];
    }
}

fn channel_sums(g: &[f64], c: usize) -> Vec<f64> {
    let mut s = vec![0.0; c];
    for (i, v) in g.iter().enumerate() {
        s[i % c] += v;
    }
    s
}
