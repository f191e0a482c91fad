//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order and the backward pass is a single reverse sweep.

use crate::error::{Error, Result};

use super::ops::{activation, attention, conv, dense, elementwise};
use super::{ParameterSet, Scalar, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Op kind plus whatever the backward pass needs that is not an input value.
enum Op<T> {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    Conv1d { x: Var, w: Var, b: Var, stride: usize, pad: usize },
    ConvTranspose1d { x: Var, w: Var, b: Var, stride: usize, pad: usize, output_pad: usize },
    DwConv1d { x: Var, w: Var, b: Var },
    Sigmoid { x: Var },
    Swish { x: Var, beta: Var, sig: Vec<T> },
    Gelu { x: Var, cdf: Vec<T> },
    Relu { x: Var },
    Softmax { x: Var },
    LayerNorm { x: Var, gamma: Var, beta: Var, cache: attention::LayerNormCache<T> },
    Mhsa { x: Var, wq: Var, wk: Var, wv: Var, wo: Var, heads: usize, cache: attention::MhsaCache<T> },
    Mul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sum { x: Var },
    Mse { pred: Var, target: Var },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A single forward evaluation and its tape.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one backward pass, retained for leaf nodes only.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<Tensor<T>> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::from_parts(self.shapes[v.0].clone(), g.clone()))
    }

    /// Gradient for `v`, zeros when no path reached it.
    pub fn get_or_zero(&self, v: Var) -> Tensor<T> {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(self.shapes[v.0].clone()))
    }

    /// Gradients for a bound parameter set, aligned with slot order.
    pub fn for_params(&self, vars: &[Var]) -> Vec<Tensor<T>> {
        vars.iter().map(|&v| self.get_or_zero(v)).collect()
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf that receives a gradient.
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// One differentiable leaf per parameter, in slot order.
    pub fn bind(&mut self, params: &ParameterSet<T>) -> Vec<Var> {
        params.values().map(|v| self.variable(v.clone())).collect()
    }

    /// Like [`Graph::bind`] but without gradient tracking.
    pub fn bind_constants(&mut self, params: &ParameterSet<T>) -> Vec<Var> {
        params.values().map(|v| self.constant(v.clone())).collect()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = dense::forward(self.value(x), self.value(w), self.value(b))?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(y, Op::Dense { x, w, b }, rg))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let y = conv::conv1d_forward(self.value(x), self.value(w), self.value(b), stride, pad)?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(y, Op::Conv1d { x, w, b, stride, pad }, rg))
    }

    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Result<Var> {
        let y = conv::conv_transpose1d_forward(
            self.value(x),
            self.value(w),
            self.value(b),
            stride,
            pad,
            output_pad,
        )?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(y, Op::ConvTranspose1d { x, w, b, stride, pad, output_pad }, rg))
    }

    /// Depthwise, stride 1, `pad = k / 2`.
    pub fn dwconv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = conv::dwconv1d_forward(self.value(x), self.value(w), self.value(b))?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(y, Op::DwConv1d { x, w, b }, rg))
    }

    fn unary(&mut self, x: Var, f: impl FnOnce(&[T]) -> Vec<T>, op: Op<T>) -> Var {
        let xv = self.value(x);
        let y = Tensor::from_parts(xv.shape().to_vec(), f(xv.data()));
        let rg = self.rg(&[x]);
        self.push(y, op, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, |d| d.iter().map(|&v| activation::sigmoid(v)).collect(), Op::Sigmoid { x })
    }

    /// `x · σ(β x)` with a learnable scalar `beta` (shape `[1]`).
    pub fn swish(&mut self, x: Var, beta: Var) -> Result<Var> {
        if self.value(beta).numel() != 1 {
            return Err(Error::dim("swish", self.value(x).shape(), self.value(beta).shape()));
        }
        let bv = self.value(beta).item();
        let xv = self.value(x);
        let (y, sig) = activation::swish_forward(xv.data(), bv);
        let y = Tensor::from_parts(xv.shape().to_vec(), y);
        let rg = self.rg(&[x, beta]);
        Ok(self.push(y, Op::Swish { x, beta, sig }, rg))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (y, cdf) = activation::gelu_forward(xv.data());
        let y = Tensor::from_parts(xv.shape().to_vec(), y);
        let rg = self.rg(&[x]);
        self.push(y, Op::Gelu { x, cdf }, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, activation::relu_forward, Op::Relu { x })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let n = *self.value(x).shape().last().unwrap();
        self.unary(x, |d| attention::softmax_rows(d, n), Op::Softmax { x })
    }

    /// Normalises over the last axis, then applies `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (y, cache) =
            attention::layer_norm_forward(self.value(x), self.value(gamma), self.value(beta))?;
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(y, Op::LayerNorm { x, gamma, beta, cache }, rg))
    }

    pub fn mhsa(&mut self, x: Var, wq: Var, wk: Var, wv: Var, wo: Var, heads: usize) -> Result<Var> {
        let weights = attention::MhsaWeights {
            wq: self.value(wq),
            wk: self.value(wk),
            wv: self.value(wv),
            wo: self.value(wo),
        };
        let (y, cache) = attention::mhsa_forward(self.value(x), &weights, heads)?;
        let rg = self.rg(&[x, wq, wk, wv, wo]);
        Ok(self.push(y, Op::Mhsa { x, wq, wk, wv, wo, heads, cache }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, sa, sb));
        }
        Ok(())
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let y = elementwise::mul(self.value(a).data(), self.value(b).data());
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, y), Op::Mul { a, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let y = elementwise::add(self.value(a).data(), self.value(b).data());
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, y), Op::Add { a, b }, rg))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// Mean squared error over all elements, shape `[1]`.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse_loss", pred, target)?;
        let l = elementwise::mse(self.value(pred).data(), self.value(target).data());
        let rg = self.rg(&[pred, target]);
        Ok(self.push(Tensor::scalar(l), Op::Mse { pred, target }, rg))
    }

    /// Backward pass from a one-element output with seed gradient 1.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        let shape = self.value(output).shape().to_vec();
        if self.value(output).numel() != 1 {
            return Err(Error::dim("backward", &shape, &[1]));
        }
        self.backward_with(output, Tensor::ones(shape))
    }

    /// Backward pass with an explicit upstream gradient for `output`.
    pub fn backward_with(&self, output: Var, upstream: Tensor<T>) -> Result<Gradients<T>> {
        if upstream.shape() != self.value(output).shape() {
            return Err(Error::dim("backward", self.value(output).shape(), upstream.shape()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<T>>> = (0..n).map(|_| None).collect();
        grads[output.0] = Some(upstream.into_data());

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backward_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, d: Vec<T>| {
            if !self.needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, x) in existing.iter_mut().zip(d) {
                        *e += x;
                    }
                }
                slot @ None => *slot = Some(d),
            }
        };
        match &node.op {
            Op::Leaf => {}
            &Op::Dense { x, w, b } => {
                let r = dense::backward(val(x), val(w), g, self.needs(x));
                if let Some(dx) = r.dx {
                    acc(x, dx);
                }
                acc(w, r.dw);
                acc(b, r.db);
            }
            &Op::Conv1d { x, w, b, stride, pad } => {
                let r = conv::conv1d_backward(val(x), val(w), val(b), g, stride, pad, self.needs(x));
                if let Some(dx) = r.dx {
                    acc(x, dx);
                }
                acc(w, r.dw);
                acc(b, r.db);
            }
            &Op::ConvTranspose1d { x, w, b, stride, pad, output_pad } => {
                let r = conv::conv_transpose1d_backward(
                    val(x),
                    val(w),
                    val(b),
                    g,
                    stride,
                    pad,
                    output_pad,
                    self.needs(x),
                );
                if let Some(dx) = r.dx {
                    acc(x, dx);
                }
                acc(w, r.dw);
                acc(b, r.db);
            }
            &Op::DwConv1d { x, w, b } => {
                let r = conv::dwconv1d_backward(val(x), val(w), g, self.needs(x));
                if let Some(dx) = r.dx {
                    acc(x, dx);
                }
                acc(w, r.dw);
                acc(b, r.db);
            }
            &Op::Sigmoid { x } => acc(x, activation::sigmoid_backward(node.value.data(), g)),
            Op::Swish { x, beta, sig } => {
                let (x, beta) = (*x, *beta);
                let (dx, db) = activation::swish_backward(val(x).data(), val(beta).item(), sig, g);
                acc(x, dx);
                acc(beta, vec![db]);
            }
            Op::Gelu { x, cdf } => acc(*x, activation::gelu_backward(val(*x).data(), cdf, g)),
            &Op::Relu { x } => acc(x, activation::relu_backward(val(x).data(), g)),
            &Op::Softmax { x } => {
                let n = *node.value.shape().last().unwrap();
                acc(x, attention::softmax_backward(node.value.data(), g, n));
            }
            Op::LayerNorm { x, gamma, beta, cache } => {
                let (dx, dg, db) = attention::layer_norm_backward(cache, val(*gamma).data(), g);
                acc(*x, dx);
                acc(*gamma, dg);
                acc(*beta, db);
            }
            Op::Mhsa { x, wq, wk, wv, wo, heads, cache } => {
                let weights = attention::MhsaWeights {
                    wq: val(*wq),
                    wk: val(*wk),
                    wv: val(*wv),
                    wo: val(*wo),
                };
                let r = attention::mhsa_backward(val(*x), &weights, *heads, cache, g, self.needs(*x));
                if let Some(dx) = r.dx {
                    acc(*x, dx);
                }
                acc(*wq, r.dwq);
                acc(*wk, r.dwk);
                acc(*wv, r.dwv);
                acc(*wo, r.dwo);
            }
            &Op::Mul { a, b } => {
                if self.needs(a) {
                    acc(a, elementwise::mul(g, val(b).data()));
                }
                if self.needs(b) {
                    acc(b, elementwise::mul(g, val(a).data()));
                }
            }
            &Op::Add { a, b } => {
                acc(a, g.to_vec());
                acc(b, g.to_vec());
            }
            &Op::Sum { x } => acc(x, vec![g[0]; val(x).numel()]),
            &Op::Mse { pred, target } => {
                let dp = elementwise::mse_backward(val(pred).data(), val(target).data(), g[0]);
                if self.needs(target) {
                    acc(target, dp.iter().map(|&v| -v).collect());
                }
                acc(pred, dp);
            }
        }
    }
}
