//! Reverse-mode autodiff on an append-only tape.
//!
//! A [`Tape`] is a define-by-run arena: every operation validates shapes,
//! computes its value eagerly, and appends a node recording the operation
//! and its operands. [`TensorRef`] is an index into the arena. Training
//! builds a fresh tape per step.
//!
//! The distinguishing feature is that the backward pass *emits tape
//! operations* instead of writing raw buffers: [`Tape::grad_graph`] returns
//! gradients as live tape nodes, so an expression built from them (such as
//! a gradient-norm penalty) can itself be differentiated by a later
//! [`Tape::backward`] call. Nonlinearities contribute their gradient
//! through detached masks (constants captured at the evaluation point),
//! which is exact almost everywhere and matches the usual convention for
//! piecewise-linear activations.
//!
//! Both sweeps prune by reachability: only nodes that lie on a path from a
//! requested input to the loss are visited, so e.g. differentiating a
//! critic's output with respect to its *input* never computes kernel
//! gradients.

use crate::kernels::{self, ConvDims};
use crate::tensor::{check_shape, numel, Elem, Tensor};
use crate::{Error, Result};

/// Handle to a tape node. Only valid for the tape that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorRef(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf { trainable: bool },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Recip(usize),
    Clamp(usize, f64, f64),
    MatMul(usize, usize),
    Transpose(usize),
    AddBiasRow(usize, usize),
    AddBiasChan(usize, usize),
    SumChan(usize),
    BroadcastChan(usize),
    SumAxis(usize, usize),
    BroadcastAxis(usize, usize),
    SumAll(usize),
    BroadcastAll(usize),
    Conv2d { x: usize, w: usize, sh: usize, sw: usize },
    Conv2dDx { dy: usize, w: usize, sh: usize, sw: usize },
    Conv2dDw { x: usize, dy: usize, sh: usize, sw: usize },
    Pad2d { x: usize, pad: (usize, usize, usize, usize) },
    Crop2d { x: usize, crop: (usize, usize, usize, usize) },
    Upsample2x(usize),
    SumPool2x(usize),
    Reshape(usize),
    ConcatCols(usize, usize),
    SliceCols { x: usize, lo: usize, hi: usize },
    PadCols { x: usize, left: usize },
}

impl Op {
    fn inputs(&self, out: &mut Vec<usize>) {
        out.clear();
        match *self {
            Op::Leaf { .. } => {}
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Relu(a)
            | Op::LeakyRelu(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Recip(a)
            | Op::Clamp(a, _, _)
            | Op::Transpose(a)
            | Op::SumChan(a)
            | Op::BroadcastChan(a)
            | Op::SumAxis(a, _)
            | Op::BroadcastAxis(a, _)
            | Op::SumAll(a)
            | Op::BroadcastAll(a)
            | Op::Pad2d { x: a, .. }
            | Op::Crop2d { x: a, .. }
            | Op::Upsample2x(a)
            | Op::SumPool2x(a)
            | Op::Reshape(a)
            | Op::SliceCols { x: a, .. }
            | Op::PadCols { x: a, .. } => out.push(a),
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MatMul(a, b)
            | Op::AddBiasRow(a, b)
            | Op::AddBiasChan(a, b)
            | Op::ConcatCols(a, b)
            | Op::Conv2d { x: a, w: b, .. }
            | Op::Conv2dDx { dy: a, w: b, .. }
            | Op::Conv2dDw { x: a, dy: b, .. } => {
                out.push(a);
                out.push(b);
            }
        }
    }
}

struct Node<F: Elem> {
    shape: Vec<usize>,
    data: Vec<F>,
    op: Op,
    needs_grad: bool,
    grad: Option<Vec<F>>,
}

/// Append-only autodiff arena.
pub struct Tape<F: Elem> {
    nodes: Vec<Node<F>>,
    backward_done: bool,
}

impl<F: Elem> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Elem> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, t: TensorRef) -> Result<&Node<F>> {
        self.nodes.get(t.0).ok_or_else(|| {
            Error::Tape(format!("ref {} does not belong to this tape (len {})", t.0, self.nodes.len()))
        })
    }

    pub fn shape(&self, t: TensorRef) -> Result<&[usize]> {
        Ok(&self.node(t)?.shape)
    }

    pub fn value(&self, t: TensorRef) -> Result<&[F]> {
        Ok(&self.node(t)?.data)
    }

    /// Value of a single-element tensor.
    pub fn value_scalar(&self, t: TensorRef) -> Result<F> {
        let n = self.node(t)?;
        if n.data.len() != 1 {
            return Err(Error::Tape(format!("expected scalar, got shape {:?}", n.shape)));
        }
        Ok(n.data[0])
    }

    /// Copy a node's value out as a tensor.
    pub fn tensor(&self, t: TensorRef) -> Result<Tensor<F>> {
        let n = self.node(t)?;
        Tensor::new(&n.shape, n.data.clone())
    }

    /// Gradient of the last [`Tape::backward`] call with respect to a
    /// trainable leaf. `None` if the leaf does not influence the loss.
    pub fn grad_of(&self, t: TensorRef) -> Result<Option<&[F]>> {
        Ok(self.node(t)?.grad.as_deref())
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<F>, op: Op, needs_grad: bool) -> TensorRef {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node { shape, data, op, needs_grad, grad: None });
        TensorRef(self.nodes.len() - 1)
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    // ---- inputs -----------------------------------------------------------

    /// Gradient-carrying input. Gradients from `backward` accumulate here.
    pub fn leaf(&mut self, t: &Tensor<F>) -> TensorRef {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf { trainable: true }, true)
    }

    /// Detached input: no gradient flows into it.
    pub fn constant(&mut self, t: &Tensor<F>) -> TensorRef {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf { trainable: false }, false)
    }

    pub fn constant_from(&mut self, shape: &[usize], data: Vec<F>) -> Result<TensorRef> {
        check_shape(shape)?;
        if numel(shape) != data.len() {
            return Err(Error::Shape(format!(
                "constant shape {shape:?} wants {} elements, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(self.push(shape.to_vec(), data, Op::Leaf { trainable: false }, false))
    }

    pub fn scalar_const(&mut self, x: f64) -> TensorRef {
        self.push(vec![1], vec![F::c(x)], Op::Leaf { trainable: false }, false)
    }

    // ---- elementwise ------------------------------------------------------

    fn binary_same_shape(&mut self, a: TensorRef, b: TensorRef, name: &str) -> Result<(Vec<usize>, bool)> {
        let na = self.node(a)?;
        let nb = self.node(b)?;
        if na.shape != nb.shape {
            return Err(Error::Shape(format!("{name}: shapes {:?} and {:?} differ", na.shape, nb.shape)));
        }
        Ok((na.shape.clone(), na.needs_grad || nb.needs_grad))
    }

    pub fn add(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (shape, needs) = self.binary_same_shape(a, b, "add")?;
        let data = self.nodes[a.0].data.iter().zip(&self.nodes[b.0].data).map(|(&x, &y)| x + y).collect();
        Ok(self.push(shape, data, Op::Add(a.0, b.0), needs))
    }

    pub fn sub(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (shape, needs) = self.binary_same_shape(a, b, "sub")?;
        let data = self.nodes[a.0].data.iter().zip(&self.nodes[b.0].data).map(|(&x, &y)| x - y).collect();
        Ok(self.push(shape, data, Op::Sub(a.0, b.0), needs))
    }

    pub fn mul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (shape, needs) = self.binary_same_shape(a, b, "mul")?;
        let data = self.nodes[a.0].data.iter().zip(&self.nodes[b.0].data).map(|(&x, &y)| x * y).collect();
        Ok(self.push(shape, data, Op::Mul(a.0, b.0), needs))
    }

    fn unary(&mut self, a: TensorRef, op: Op, f: impl Fn(F) -> F) -> Result<TensorRef> {
        let n = self.node(a)?;
        let shape = n.shape.clone();
        let needs = n.needs_grad;
        let data = n.data.iter().map(|&x| f(x)).collect();
        Ok(self.push(shape, data, op, needs))
    }

    pub fn neg(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Neg(a.0), |x| -x)
    }

    pub fn scale(&mut self, a: TensorRef, c: f64) -> Result<TensorRef> {
        let cf = F::c(c);
        self.unary(a, Op::Scale(a.0, c), |x| x * cf)
    }

    pub fn add_scalar(&mut self, a: TensorRef, c: f64) -> Result<TensorRef> {
        let cf = F::c(c);
        self.unary(a, Op::AddScalar(a.0), |x| x + cf)
    }

    pub fn relu(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Relu(a.0), |x| if x > F::zero() { x } else { F::zero() })
    }

    pub fn leaky_relu(&mut self, a: TensorRef, slope: f64) -> Result<TensorRef> {
        let s = F::c(slope);
        self.unary(a, Op::LeakyRelu(a.0, slope), |x| if x > F::zero() { x } else { x * s })
    }

    pub fn sigmoid(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Sigmoid(a.0), |x| F::one() / (F::one() + (-x).exp()))
    }

    pub fn tanh(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Tanh(a.0), |x| x.tanh())
    }

    pub fn exp(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Exp(a.0), |x| x.exp())
    }

    /// Natural log; domain is positive inputs.
    pub fn ln(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Ln(a.0), |x| x.ln())
    }

    /// Square root; domain is non-negative inputs (gradient needs positive).
    pub fn sqrt(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Sqrt(a.0), |x| x.sqrt())
    }

    /// Reciprocal; domain is nonzero inputs.
    pub fn recip(&mut self, a: TensorRef) -> Result<TensorRef> {
        self.unary(a, Op::Recip(a.0), |x| F::one() / x)
    }

    /// Clamp to `[lo, hi]`; gradient passes only strictly inside the range.
    pub fn clamp(&mut self, a: TensorRef, lo: f64, hi: f64) -> Result<TensorRef> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Tape(format!("clamp: lo {lo} must be < hi {hi}")));
        }
        let (l, h) = (F::c(lo), F::c(hi));
        self.unary(a, Op::Clamp(a.0, lo, hi), |x| x.max(l).min(h))
    }

    // ---- linear algebra ----------------------------------------------------

    fn rank2(&self, t: TensorRef, name: &str) -> Result<(usize, usize)> {
        let n = self.node(t)?;
        if n.shape.len() != 2 {
            return Err(Error::Shape(format!("{name}: expected rank-2, got {:?}", n.shape)));
        }
        Ok((n.shape[0], n.shape[1]))
    }

    pub fn matmul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (m, ka) = self.rank2(a, "matmul lhs")?;
        let (kb, n) = self.rank2(b, "matmul rhs")?;
        if ka != kb {
            return Err(Error::Shape(format!("matmul: inner dims {ka} and {kb} differ")));
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        let data = kernels::matmul(m, ka, n, &self.nodes[a.0].data, &self.nodes[b.0].data);
        Ok(self.push(vec![m, n], data, Op::MatMul(a.0, b.0), needs))
    }

    pub fn transpose(&mut self, a: TensorRef) -> Result<TensorRef> {
        let (r, c) = self.rank2(a, "transpose")?;
        let needs = self.needs(a.0);
        let data = kernels::transpose2d(&self.nodes[a.0].data, r, c);
        Ok(self.push(vec![c, r], data, Op::Transpose(a.0), needs))
    }

    /// `x (n, d) + bias (d)`, broadcast over rows.
    pub fn add_bias_row(&mut self, x: TensorRef, bias: TensorRef) -> Result<TensorRef> {
        let (n, d) = self.rank2(x, "add_bias_row x")?;
        let nb = self.node(bias)?;
        if nb.shape != [d] {
            return Err(Error::Shape(format!("add_bias_row: bias {:?} does not match width {d}", nb.shape)));
        }
        let needs = self.needs(x.0) || self.needs(bias.0);
        let mut data = self.nodes[x.0].data.clone();
        for i in 0..n {
            for j in 0..d {
                data[i * d + j] = data[i * d + j] + self.nodes[bias.0].data[j];
            }
        }
        Ok(self.push(vec![n, d], data, Op::AddBiasRow(x.0, bias.0), needs))
    }

    // ---- reductions / broadcasts -------------------------------------------

    fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
        let outer: usize = shape[..axis].iter().product();
        let mid = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        (outer, mid, inner)
    }

    /// Sum over one axis, keeping it as extent 1.
    pub fn sum_axis(&mut self, a: TensorRef, axis: usize) -> Result<TensorRef> {
        let n = self.node(a)?;
        if axis >= n.shape.len() {
            return Err(Error::Shape(format!("sum_axis: axis {axis} out of range for {:?}", n.shape)));
        }
        let (outer, mid, inner) = Self::axis_split(&n.shape, axis);
        let needs = n.needs_grad;
        let mut shape = n.shape.clone();
        shape[axis] = 1;
        let src = &self.nodes[a.0].data;
        let mut data = vec![F::zero(); outer * inner];
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                for i in 0..inner {
                    data[o * inner + i] = data[o * inner + i] + src[base + i];
                }
            }
        }
        Ok(self.push(shape, data, Op::SumAxis(a.0, axis), needs))
    }

    /// Repeat an extent-1 axis out to length `len`.
    pub fn broadcast_axis(&mut self, a: TensorRef, axis: usize, len: usize) -> Result<TensorRef> {
        let n = self.node(a)?;
        if axis >= n.shape.len() || n.shape[axis] != 1 {
            return Err(Error::Shape(format!(
                "broadcast_axis: axis {axis} of {:?} must exist with extent 1",
                n.shape
            )));
        }
        if len == 0 {
            return Err(Error::Shape("broadcast_axis: target length must be positive".into()));
        }
        let (outer, _, inner) = Self::axis_split(&n.shape, axis);
        let needs = n.needs_grad;
        let mut shape = n.shape.clone();
        shape[axis] = len;
        let src = &self.nodes[a.0].data;
        let mut data = vec![F::zero(); outer * len * inner];
        for o in 0..outer {
            let s = &src[o * inner..(o + 1) * inner];
            for m in 0..len {
                data[(o * len + m) * inner..(o * len + m + 1) * inner].copy_from_slice(s);
            }
        }
        Ok(self.push(shape, data, Op::BroadcastAxis(a.0, axis), needs))
    }

    /// Sum of all elements, as a `[1]` scalar.
    pub fn sum_all(&mut self, a: TensorRef) -> Result<TensorRef> {
        let n = self.node(a)?;
        let needs = n.needs_grad;
        let mut acc = F::zero();
        for &x in &n.data {
            acc = acc + x;
        }
        Ok(self.push(vec![1], vec![acc], Op::SumAll(a.0), needs))
    }

    /// Fill shape `shape` with a `[1]` scalar's value.
    pub fn broadcast_all(&mut self, a: TensorRef, shape: &[usize]) -> Result<TensorRef> {
        check_shape(shape)?;
        let v = self.value_scalar(a)?;
        let needs = self.needs(a.0);
        Ok(self.push(shape.to_vec(), vec![v; numel(shape)], Op::BroadcastAll(a.0), needs))
    }

    /// Mean of all elements, as a `[1]` scalar.
    pub fn mean_all(&mut self, a: TensorRef) -> Result<TensorRef> {
        let n = self.node(a)?.data.len();
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    // ---- conv and spatial ---------------------------------------------------

    fn rank4(&self, t: TensorRef, name: &str) -> Result<(usize, usize, usize, usize)> {
        let n = self.node(t)?;
        if n.shape.len() != 4 {
            return Err(Error::Shape(format!("{name}: expected rank-4, got {:?}", n.shape)));
        }
        Ok((n.shape[0], n.shape[1], n.shape[2], n.shape[3]))
    }

    fn conv_dims(&self, x: TensorRef, w: TensorRef, stride: (usize, usize)) -> Result<ConvDims> {
        let (b, cin, h, wd) = self.rank4(x, "conv2d x")?;
        let (cout, wcin, kh, kw) = self.rank4(w, "conv2d w")?;
        if cin != wcin {
            return Err(Error::Shape(format!("conv2d: x has {cin} channels, kernel expects {wcin}")));
        }
        Ok(ConvDims { batch: b, cin, h, w: wd, cout, kh, kw, sh: stride.0, sw: stride.1 })
    }

    /// Valid strided cross-correlation: `x (b,cin,h,w)` with kernel
    /// `(cout,cin,kh,kw)` -> `(b,cout,oh,ow)`.
    pub fn conv2d(&mut self, x: TensorRef, w: TensorRef, stride: (usize, usize)) -> Result<TensorRef> {
        let d = self.conv_dims(x, w, stride)?;
        let (oh, ow) = d.out_hw()?;
        let needs = self.needs(x.0) || self.needs(w.0);
        let data = kernels::conv2d_fwd(&self.nodes[x.0].data, &self.nodes[w.0].data, &d)?;
        Ok(self.push(vec![d.batch, d.cout, oh, ow], data, Op::Conv2d { x: x.0, w: w.0, sh: d.sh, sw: d.sw }, needs))
    }

    /// Adjoint of `conv2d` in its first argument: maps output-shaped `dy`
    /// back to an input-shaped tensor. `in_chw` is the target (cin, h, w).
    pub fn conv2d_dx(
        &mut self,
        dy: TensorRef,
        w: TensorRef,
        stride: (usize, usize),
        in_chw: (usize, usize, usize),
    ) -> Result<TensorRef> {
        let (b, couty, oh, ow) = self.rank4(dy, "conv2d_dx dy")?;
        let (cout, cin, kh, kw) = self.rank4(w, "conv2d_dx w")?;
        if couty != cout {
            return Err(Error::Shape(format!("conv2d_dx: dy has {couty} channels, kernel {cout}")));
        }
        if in_chw.0 != cin {
            return Err(Error::Shape(format!("conv2d_dx: target cin {} vs kernel {cin}", in_chw.0)));
        }
        let d = ConvDims { batch: b, cin, h: in_chw.1, w: in_chw.2, cout, kh, kw, sh: stride.0, sw: stride.1 };
        let (eh, ew) = d.out_hw()?;
        if (eh, ew) != (oh, ow) {
            return Err(Error::Shape(format!(
                "conv2d_dx: dy spatial ({oh}, {ow}) inconsistent with target ({eh}, {ew})"
            )));
        }
        let needs = self.needs(dy.0) || self.needs(w.0);
        let data = kernels::conv2d_dx(&self.nodes[dy.0].data, &self.nodes[w.0].data, &d)?;
        Ok(self.push(
            vec![b, cin, in_chw.1, in_chw.2],
            data,
            Op::Conv2dDx { dy: dy.0, w: w.0, sh: d.sh, sw: d.sw },
            needs,
        ))
    }

    /// Adjoint of `conv2d` in its kernel argument: accumulates a
    /// kernel-shaped tensor from `x` and output-shaped `dy`.
    pub fn conv2d_dw(
        &mut self,
        x: TensorRef,
        dy: TensorRef,
        stride: (usize, usize),
        k_hw: (usize, usize),
    ) -> Result<TensorRef> {
        let (b, cin, h, w) = self.rank4(x, "conv2d_dw x")?;
        let (by, cout, oh, ow) = self.rank4(dy, "conv2d_dw dy")?;
        if b != by {
            return Err(Error::Shape(format!("conv2d_dw: batch {b} vs {by}")));
        }
        let d = ConvDims { batch: b, cin, h, w, cout, kh: k_hw.0, kw: k_hw.1, sh: stride.0, sw: stride.1 };
        let (eh, ew) = d.out_hw()?;
        if (eh, ew) != (oh, ow) {
            return Err(Error::Shape(format!(
                "conv2d_dw: dy spatial ({oh}, {ow}) inconsistent with expected ({eh}, {ew})"
            )));
        }
        let needs = self.needs(x.0) || self.needs(dy.0);
        let data = kernels::conv2d_dw(&self.nodes[x.0].data, &self.nodes[dy.0].data, &d)?;
        Ok(self.push(
            vec![cout, cin, k_hw.0, k_hw.1],
            data,
            Op::Conv2dDw { x: x.0, dy: dy.0, sh: d.sh, sw: d.sw },
            needs,
        ))
    }

    /// `x (b,c,h,w) + bias (c)`, broadcast over batch and space.
    pub fn add_bias_chan(&mut self, x: TensorRef, bias: TensorRef) -> Result<TensorRef> {
        let (b, c, h, w) = self.rank4(x, "add_bias_chan x")?;
        let nb = self.node(bias)?;
        if nb.shape != [c] {
            return Err(Error::Shape(format!("add_bias_chan: bias {:?} does not match {c} channels", nb.shape)));
        }
        let needs = self.needs(x.0) || self.needs(bias.0);
        let mut data = self.nodes[x.0].data.clone();
        let hw = h * w;
        for bi in 0..b {
            for ci in 0..c {
                let bv = self.nodes[bias.0].data[ci];
                let base = (bi * c + ci) * hw;
                for p in &mut data[base..base + hw] {
                    *p = *p + bv;
                }
            }
        }
        Ok(self.push(vec![b, c, h, w], data, Op::AddBiasChan(x.0, bias.0), needs))
    }

    /// Sum `(b,c,h,w)` over batch and space -> `(c)`.
    pub fn sum_chan(&mut self, x: TensorRef) -> Result<TensorRef> {
        let (b, c, h, w) = self.rank4(x, "sum_chan x")?;
        let needs = self.needs(x.0);
        let hw = h * w;
        let src = &self.nodes[x.0].data;
        let mut data = vec![F::zero(); c];
        for bi in 0..b {
            for (ci, d) in data.iter_mut().enumerate() {
                let base = (bi * c + ci) * hw;
                let mut acc = F::zero();
                for &v in &src[base..base + hw] {
                    acc = acc + v;
                }
                *d = *d + acc;
            }
        }
        Ok(self.push(vec![c], data, Op::SumChan(x.0), needs))
    }

    /// Repeat a `(c)` vector out to `(b,c,h,w)`.
    pub fn broadcast_chan(&mut self, bias: TensorRef, b: usize, h: usize, w: usize) -> Result<TensorRef> {
        let n = self.node(bias)?;
        if n.shape.len() != 1 {
            return Err(Error::Shape(format!("broadcast_chan: expected rank-1, got {:?}", n.shape)));
        }
        if b == 0 || h == 0 || w == 0 {
            return Err(Error::Shape("broadcast_chan: extents must be positive".into()));
        }
        let c = n.shape[0];
        let needs = n.needs_grad;
        let src = self.nodes[bias.0].data.clone();
        let hw = h * w;
        let mut data = vec![F::zero(); b * c * hw];
        for bi in 0..b {
            for (ci, &s) in src.iter().enumerate() {
                let base = (bi * c + ci) * hw;
                data[base..base + hw].fill(s);
            }
        }
        Ok(self.push(vec![b, c, h, w], data, Op::BroadcastChan(bias.0), needs))
    }

    /// Zero-pad spatial dims; `pad = (top, bottom, left, right)`.
    pub fn pad2d(&mut self, x: TensorRef, pad: (usize, usize, usize, usize)) -> Result<TensorRef> {
        let (b, c, h, w) = self.rank4(x, "pad2d x")?;
        let needs = self.needs(x.0);
        let data = kernels::pad2d(&self.nodes[x.0].data, b, c, h, w, pad);
        Ok(self.push(vec![b, c, h + pad.0 + pad.1, w + pad.2 + pad.3], data, Op::Pad2d { x: x.0, pad }, needs))
    }

    /// Remove a spatial border; `crop = (top, bottom, left, right)`.
    pub fn crop2d(&mut self, x: TensorRef, crop: (usize, usize, usize, usize)) -> Result<TensorRef> {
        let (b, c, h, w) = self.rank4(x, "crop2d x")?;
        if crop.0 + crop.1 >= h || crop.2 + crop.3 >= w {
            return Err(Error::Shape(format!("crop2d: crop {crop:?} consumes whole input ({h}, {w})")));
        }
        let needs = self.needs(x.0);
        let data = kernels::crop2d(&self.nodes[x.0].data, b, c, h, w, crop);
        Ok(self.push(
            vec![b, c, h - crop.0 - crop.1, w - crop.2 - crop.3],
            data,
            Op::Crop2d { x: x.0, crop },
            needs,
        ))
    }

    /// Nearest-neighbor 2x spatial upsample.
    pub fn upsample2x(&mut self, x: TensorRef) -> Result<TensorRef> {
        let (b, c, h, w) = self.rank4(x, "upsample2x x")?;
        let needs = self.needs(x.0);
        let data = kernels::upsample2x(&self.nodes[x.0].data, b, c, h, w);
        Ok(self.push(vec![b, c, 2 * h, 2 * w], data, Op::Upsample2x(x.0), needs))
    }

    /// 2x2 sum pooling (adjoint of `upsample2x`).
    pub fn sumpool2x(&mut self, x: TensorRef) -> Result<TensorRef> {
        let (b, c, h, w) = self.rank4(x, "sumpool2x x")?;
        let needs = self.needs(x.0);
        let data = kernels::sumpool2x(&self.nodes[x.0].data, b, c, h, w)?;
        Ok(self.push(vec![b, c, h / 2, w / 2], data, Op::SumPool2x(x.0), needs))
    }

    /// 2x2 average pooling.
    pub fn avgpool2x(&mut self, x: TensorRef) -> Result<TensorRef> {
        let s = self.sumpool2x(x)?;
        self.scale(s, 0.25)
    }

    // ---- structure ----------------------------------------------------------

    pub fn reshape(&mut self, x: TensorRef, shape: &[usize]) -> Result<TensorRef> {
        check_shape(shape)?;
        let n = self.node(x)?;
        if numel(shape) != n.data.len() {
            return Err(Error::Shape(format!(
                "reshape: {:?} ({} elems) to {shape:?} ({} elems)",
                n.shape,
                n.data.len(),
                numel(shape)
            )));
        }
        let needs = n.needs_grad;
        let data = n.data.clone();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(x.0), needs))
    }

    /// Concatenate two rank-2 tensors along columns: `(n,p) ++ (n,q) ->
    /// (n,p+q)`.
    pub fn concat_cols(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (na, pa) = self.rank2(a, "concat_cols lhs")?;
        let (nb, pb) = self.rank2(b, "concat_cols rhs")?;
        if na != nb {
            return Err(Error::Shape(format!("concat_cols: row counts {na} and {nb} differ")));
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        let mut data = vec![F::zero(); na * (pa + pb)];
        for i in 0..na {
            data[i * (pa + pb)..i * (pa + pb) + pa].copy_from_slice(&self.nodes[a.0].data[i * pa..(i + 1) * pa]);
            data[i * (pa + pb) + pa..(i + 1) * (pa + pb)]
                .copy_from_slice(&self.nodes[b.0].data[i * pb..(i + 1) * pb]);
        }
        Ok(self.push(vec![na, pa + pb], data, Op::ConcatCols(a.0, b.0), needs))
    }

    /// Column slice of a rank-2 tensor: columns `lo..hi`.
    pub fn slice_cols(&mut self, x: TensorRef, lo: usize, hi: usize) -> Result<TensorRef> {
        let (n, d) = self.rank2(x, "slice_cols x")?;
        if lo >= hi || hi > d {
            return Err(Error::Shape(format!("slice_cols: range {lo}..{hi} invalid for width {d}")));
        }
        let needs = self.needs(x.0);
        let w = hi - lo;
        let mut data = vec![F::zero(); n * w];
        for i in 0..n {
            data[i * w..(i + 1) * w].copy_from_slice(&self.nodes[x.0].data[i * d + lo..i * d + hi]);
        }
        Ok(self.push(vec![n, w], data, Op::SliceCols { x: x.0, lo, hi }, needs))
    }

    /// Zero-pad columns of a rank-2 tensor (adjoint of `slice_cols`).
    pub fn pad_cols(&mut self, x: TensorRef, left: usize, right: usize) -> Result<TensorRef> {
        let (n, d) = self.rank2(x, "pad_cols x")?;
        let needs = self.needs(x.0);
        let w = left + d + right;
        let mut data = vec![F::zero(); n * w];
        for i in 0..n {
            data[i * w + left..i * w + left + d].copy_from_slice(&self.nodes[x.0].data[i * d..(i + 1) * d]);
        }
        Ok(self.push(vec![n, w], data, Op::PadCols { x: x.0, left }, needs))
    }

    // ---- composites ----------------------------------------------------------

    /// Row-wise L2 normalization of `(n, d)` onto the unit hypersphere.
    /// Errors if any row norm falls below `1e-12` (the projection is
    /// undefined near the origin).
    pub fn l2_normalize_rows(&mut self, x: TensorRef) -> Result<TensorRef> {
        let (_, d) = self.rank2(x, "l2_normalize_rows x")?;
        let sq = self.mul(x, x)?;
        let ssum = self.sum_axis(sq, 1)?;
        let norm = self.sqrt(ssum)?;
        let min_norm = self.nodes[norm.0].data.iter().fold(f64::INFINITY, |m, &v| m.min(v.to_f64()));
        if min_norm.is_nan() || min_norm < 1e-12 {
            return Err(Error::Numeric(format!(
                "l2_normalize_rows: row norm {min_norm:e} below 1e-12; input too close to the origin"
            )));
        }
        let inv = self.recip(norm)?;
        let invb = self.broadcast_axis(inv, 1, d)?;
        self.mul(x, invb)
    }

    /// Mean binary cross-entropy `-(t ln p + (1-t) ln(1-p))` with
    /// predictions clamped to `[eps, 1-eps]`, `eps = 1e-7`.
    pub fn bce(&mut self, pred: TensorRef, target: TensorRef) -> Result<TensorRef> {
        const EPS: f64 = 1e-7;
        self.binary_same_shape(pred, target, "bce")?;
        let p = self.clamp(pred, EPS, 1.0 - EPS)?;
        let lp = self.ln(p)?;
        let np = self.neg(p)?;
        let omp = self.add_scalar(np, 1.0)?;
        let lomp = self.ln(omp)?;
        let nt = self.neg(target)?;
        let omt = self.add_scalar(nt, 1.0)?;
        let a = self.mul(target, lp)?;
        let b = self.mul(omt, lomp)?;
        let s = self.add(a, b)?;
        let m = self.mean_all(s)?;
        self.neg(m)
    }

    /// Mean binary cross-entropy of sigmoid(x) against targets, fused as
    /// `relu(x) - x t + ln(1 + exp(-|x|))` so the gradient is exactly
    /// `sigmoid(x) - t` (for x != 0; the relu kink picks a subgradient
    /// there) even where a separate sigmoid would round to 0 or 1 and
    /// strand the loss on [`bce`](Self::bce)'s clamp plateau.
    pub fn bce_logits(&mut self, logits: TensorRef, target: TensorRef) -> Result<TensorRef> {
        self.binary_same_shape(logits, target, "bce_logits")?;
        let pos = self.relu(logits)?;
        let nx = self.neg(logits)?;
        let negpart = self.relu(nx)?;
        let absx = self.add(pos, negpart)?;
        let nabs = self.neg(absx)?;
        let e = self.exp(nabs)?;
        let ope = self.add_scalar(e, 1.0)?;
        let soft = self.ln(ope)?;
        let xt = self.mul(logits, target)?;
        let nxt = self.neg(xt)?;
        let lin = self.add(pos, nxt)?;
        let per = self.add(lin, soft)?;
        self.mean_all(per)
    }

    /// Per-location channel RMS normalization of `(b,c,h,w)`:
    /// `x / sqrt(mean_c x^2 + 1e-8)`.
    pub fn pixelnorm(&mut self, x: TensorRef) -> Result<TensorRef> {
        let (_, c, _, _) = self.rank4(x, "pixelnorm x")?;
        let sq = self.mul(x, x)?;
        let s = self.sum_axis(sq, 1)?;
        let ms = self.scale(s, 1.0 / c as f64)?;
        let stable = self.add_scalar(ms, 1e-8)?;
        let root = self.sqrt(stable)?;
        let inv = self.recip(root)?;
        let invb = self.broadcast_axis(inv, 1, c)?;
        self.mul(x, invb)
    }

    /// Mean softmax cross-entropy of `(n, c)` logits against one-hot
    /// targets. The row-max shift is detached (a constant), which leaves
    /// the gradient unchanged and keeps `exp` in range.
    pub fn softmax_cross_entropy(&mut self, logits: TensorRef, onehot: TensorRef) -> Result<TensorRef> {
        let (n, c) = self.rank2(logits, "softmax_cross_entropy logits")?;
        self.binary_same_shape(logits, onehot, "softmax_cross_entropy")?;
        let mut maxes = vec![F::zero(); n];
        for (i, m) in maxes.iter_mut().enumerate() {
            let row = &self.nodes[logits.0].data[i * c..(i + 1) * c];
            *m = row.iter().fold(F::neg_infinity(), |acc, &v| acc.max(v));
        }
        let mref = self.constant_from(&[n, 1], maxes)?;
        let mb = self.broadcast_axis(mref, 1, c)?;
        let xs = self.sub(logits, mb)?;
        let e = self.exp(xs)?;
        let s = self.sum_axis(e, 1)?;
        let ls = self.ln(s)?;
        let lsb = self.broadcast_axis(ls, 1, c)?;
        let logsm = self.sub(xs, lsb)?;
        let picked = self.mul(logsm, onehot)?;
        let total = self.sum_all(picked)?;
        self.scale(total, -1.0 / n as f64)
    }

    // ---- backward -------------------------------------------------------------

    /// Mark, for nodes `0..=horizon`, which are reachable *from* the given
    /// sources walking forward (descendants).
    fn descendants(&self, sources: &[usize], horizon: usize) -> Vec<bool> {
        let mut mark = vec![false; horizon + 1];
        for &s in sources {
            if s <= horizon {
                mark[s] = true;
            }
        }
        let mut ins = Vec::with_capacity(2);
        for i in 0..=horizon {
            if mark[i] {
                continue;
            }
            self.nodes[i].op.inputs(&mut ins);
            if ins.iter().any(|&j| mark[j]) {
                mark[i] = true;
            }
        }
        mark
    }

    /// Mark, for nodes `0..=horizon`, the ancestors of `root` (inclusive).
    fn ancestors(&self, root: usize) -> Vec<bool> {
        let mut mark = vec![false; root + 1];
        mark[root] = true;
        let mut ins = Vec::with_capacity(2);
        for i in (0..=root).rev() {
            if !mark[i] {
                continue;
            }
            self.nodes[i].op.inputs(&mut ins);
            for &j in &ins {
                mark[j] = true;
            }
        }
        mark
    }

    /// Reverse sweep from `loss`, emitting gradient nodes for every node in
    /// `active`. Returns the gradient ref per node index (None = no path).
    fn vjp(&mut self, loss: usize, active: &[bool]) -> Result<Vec<Option<TensorRef>>> {
        let mut gmap: Vec<Option<TensorRef>> = vec![None; loss + 1];
        let seed_shape = self.nodes[loss].shape.clone();
        let seed = self.constant_from(&seed_shape, vec![F::one()])?;
        gmap[loss] = Some(seed);
        let mut contribs: Vec<(usize, TensorRef)> = Vec::with_capacity(2);
        for i in (0..=loss).rev() {
            if !active[i] {
                continue;
            }
            let Some(g) = gmap[i] else { continue };
            contribs.clear();
            self.emit_contribs(i, g, active, &mut contribs)?;
            for &(j, contrib) in &contribs {
                gmap[j] = Some(match gmap[j] {
                    None => contrib,
                    Some(prev) => self.add(prev, contrib)?,
                });
            }
        }
        Ok(gmap)
    }

    /// Per-op chain rule, emitted as tape operations. Only contributions to
    /// `active` inputs are produced, so unreachable branches (e.g. kernel
    /// gradients when only input gradients are requested) cost nothing.
    fn emit_contribs(
        &mut self,
        i: usize,
        g: TensorRef,
        active: &[bool],
        out: &mut Vec<(usize, TensorRef)>,
    ) -> Result<()> {
        let want = |j: usize| j < active.len() && active[j];
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                if want(a) {
                    out.push((a, g));
                }
                if want(b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if want(a) {
                    out.push((a, g));
                }
                if want(b) {
                    out.push((b, self.neg(g)?));
                }
            }
            Op::Mul(a, b) => {
                if want(a) {
                    let gb = self.mul(g, TensorRef(b))?;
                    out.push((a, gb));
                }
                if want(b) {
                    let ga = self.mul(g, TensorRef(a))?;
                    out.push((b, ga));
                }
            }
            Op::Neg(a) => {
                if want(a) {
                    out.push((a, self.neg(g)?));
                }
            }
            Op::Scale(a, c) => {
                if want(a) {
                    out.push((a, self.scale(g, c)?));
                }
            }
            Op::AddScalar(a) => {
                if want(a) {
                    out.push((a, g));
                }
            }
            Op::Relu(a) => {
                if want(a) {
                    let mask: Vec<F> = self.nodes[a]
                        .data
                        .iter()
                        .map(|&x| if x > F::zero() { F::one() } else { F::zero() })
                        .collect();
                    let shape = self.nodes[a].shape.clone();
                    let m = self.constant_from(&shape, mask)?;
                    out.push((a, self.mul(g, m)?));
                }
            }
            Op::LeakyRelu(a, slope) => {
                if want(a) {
                    let s = F::c(slope);
                    let mask: Vec<F> =
                        self.nodes[a].data.iter().map(|&x| if x > F::zero() { F::one() } else { s }).collect();
                    let shape = self.nodes[a].shape.clone();
                    let m = self.constant_from(&shape, mask)?;
                    out.push((a, self.mul(g, m)?));
                }
            }
            Op::Sigmoid(a) => {
                if want(a) {
                    let y = TensorRef(i);
                    let ny = self.neg(y)?;
                    let omy = self.add_scalar(ny, 1.0)?;
                    let d = self.mul(y, omy)?;
                    out.push((a, self.mul(g, d)?));
                }
            }
            Op::Tanh(a) => {
                if want(a) {
                    let y = TensorRef(i);
                    let y2 = self.mul(y, y)?;
                    let ny2 = self.neg(y2)?;
                    let d = self.add_scalar(ny2, 1.0)?;
                    out.push((a, self.mul(g, d)?));
                }
            }
            Op::Exp(a) => {
                if want(a) {
                    out.push((a, self.mul(g, TensorRef(i))?));
                }
            }
            Op::Ln(a) => {
                if want(a) {
                    let r = self.recip(TensorRef(a))?;
                    out.push((a, self.mul(g, r)?));
                }
            }
            Op::Sqrt(a) => {
                if want(a) {
                    let r = self.recip(TensorRef(i))?;
                    let gh = self.mul(g, r)?;
                    out.push((a, self.scale(gh, 0.5)?));
                }
            }
            Op::Recip(a) => {
                if want(a) {
                    let y = TensorRef(i);
                    let y2 = self.mul(y, y)?;
                    let gy = self.mul(g, y2)?;
                    out.push((a, self.neg(gy)?));
                }
            }
            Op::Clamp(a, lo, hi) => {
                if want(a) {
                    let (l, h) = (F::c(lo), F::c(hi));
                    let mask: Vec<F> = self.nodes[a]
                        .data
                        .iter()
                        .map(|&x| if x > l && x < h { F::one() } else { F::zero() })
                        .collect();
                    let shape = self.nodes[a].shape.clone();
                    let m = self.constant_from(&shape, mask)?;
                    out.push((a, self.mul(g, m)?));
                }
            }
            Op::MatMul(a, b) => {
                if want(a) {
                    let bt = self.transpose(TensorRef(b))?;
                    out.push((a, self.matmul(g, bt)?));
                }
                if want(b) {
                    let at = self.transpose(TensorRef(a))?;
                    out.push((b, self.matmul(at, g)?));
                }
            }
            Op::Transpose(a) => {
                if want(a) {
                    out.push((a, self.transpose(g)?));
                }
            }
            Op::AddBiasRow(x, bias) => {
                if want(x) {
                    out.push((x, g));
                }
                if want(bias) {
                    let s = self.sum_axis(g, 0)?;
                    let d = self.nodes[bias].shape[0];
                    out.push((bias, self.reshape(s, &[d])?));
                }
            }
            Op::AddBiasChan(x, bias) => {
                if want(x) {
                    out.push((x, g));
                }
                if want(bias) {
                    out.push((bias, self.sum_chan(g)?));
                }
            }
            Op::SumChan(x) => {
                if want(x) {
                    let s = self.nodes[x].shape.clone();
                    out.push((x, self.broadcast_chan(g, s[0], s[2], s[3])?));
                }
            }
            Op::BroadcastChan(bias) => {
                if want(bias) {
                    out.push((bias, self.sum_chan(g)?));
                }
            }
            Op::SumAxis(x, axis) => {
                if want(x) {
                    let len = self.nodes[x].shape[axis];
                    out.push((x, self.broadcast_axis(g, axis, len)?));
                }
            }
            Op::BroadcastAxis(x, axis) => {
                if want(x) {
                    out.push((x, self.sum_axis(g, axis)?));
                }
            }
            Op::SumAll(x) => {
                if want(x) {
                    let shape = self.nodes[x].shape.clone();
                    out.push((x, self.broadcast_all(g, &shape)?));
                }
            }
            Op::BroadcastAll(x) => {
                if want(x) {
                    out.push((x, self.sum_all(g)?));
                }
            }
            Op::Conv2d { x, w, sh, sw } => {
                if want(x) {
                    let s = &self.nodes[x].shape;
                    let chw = (s[1], s[2], s[3]);
                    out.push((x, self.conv2d_dx(g, TensorRef(w), (sh, sw), chw)?));
                }
                if want(w) {
                    let k = &self.nodes[w].shape;
                    let khw = (k[2], k[3]);
                    out.push((w, self.conv2d_dw(TensorRef(x), g, (sh, sw), khw)?));
                }
            }
            Op::Conv2dDx { dy, w, sh, sw } => {
                // i holds an x-shaped value; g is x-shaped.
                if want(dy) {
                    out.push((dy, self.conv2d(g, TensorRef(w), (sh, sw))?));
                }
                if want(w) {
                    let k = &self.nodes[w].shape;
                    let khw = (k[2], k[3]);
                    out.push((w, self.conv2d_dw(g, TensorRef(dy), (sh, sw), khw)?));
                }
            }
            Op::Conv2dDw { x, dy, sh, sw } => {
                // i holds a kernel-shaped value; g is kernel-shaped.
                if want(x) {
                    let s = &self.nodes[x].shape;
                    let chw = (s[1], s[2], s[3]);
                    out.push((x, self.conv2d_dx(TensorRef(dy), g, (sh, sw), chw)?));
                }
                if want(dy) {
                    out.push((dy, self.conv2d(TensorRef(x), g, (sh, sw))?));
                }
            }
            Op::Pad2d { x, pad } => {
                if want(x) {
                    out.push((x, self.crop2d(g, pad)?));
                }
            }
            Op::Crop2d { x, crop } => {
                if want(x) {
                    out.push((x, self.pad2d(g, crop)?));
                }
            }
            Op::Upsample2x(x) => {
                if want(x) {
                    out.push((x, self.sumpool2x(g)?));
                }
            }
            Op::SumPool2x(x) => {
                if want(x) {
                    out.push((x, self.upsample2x(g)?));
                }
            }
            Op::Reshape(x) => {
                if want(x) {
                    let shape = self.nodes[x].shape.clone();
                    out.push((x, self.reshape(g, &shape)?));
                }
            }
            Op::ConcatCols(a, b) => {
                let pa = self.nodes[a].shape[1];
                let pb = self.nodes[b].shape[1];
                if want(a) {
                    out.push((a, self.slice_cols(g, 0, pa)?));
                }
                if want(b) {
                    out.push((b, self.slice_cols(g, pa, pa + pb)?));
                }
            }
            Op::SliceCols { x, lo, hi } => {
                if want(x) {
                    let d = self.nodes[x].shape[1];
                    out.push((x, self.pad_cols(g, lo, d - hi)?));
                }
            }
            Op::PadCols { x, left } => {
                if want(x) {
                    let d = self.nodes[x].shape[1];
                    out.push((x, self.slice_cols(g, left, left + d)?));
                }
            }
        }
        Ok(())
    }

    /// Differentiate a scalar `loss` with respect to `wrt`, *emitting the
    /// gradients as tape nodes* so they stay differentiable. Inputs that do
    /// not influence the loss get a zero constant. May be called repeatedly
    /// and freely mixed with further forward ops; only the final
    /// [`Tape::backward`] is single-shot.
    pub fn grad_graph(&mut self, loss: TensorRef, wrt: &[TensorRef]) -> Result<Vec<TensorRef>> {
        let ln = self.node(loss)?;
        if ln.data.len() != 1 {
            return Err(Error::Tape(format!("grad_graph: loss must be scalar, got {:?}", ln.shape)));
        }
        for &t in wrt {
            self.node(t)?;
        }
        let horizon = loss.0;
        let sources: Vec<usize> = wrt.iter().map(|t| t.0).filter(|&j| j <= horizon).collect();
        let desc = self.descendants(&sources, horizon);
        let anc = self.ancestors(horizon);
        let active: Vec<bool> = desc.iter().zip(&anc).map(|(&d, &a)| d && a).collect();
        let gmap = if active[horizon] { self.vjp(horizon, &active)? } else { vec![None; horizon + 1] };
        let mut out = Vec::with_capacity(wrt.len());
        for &t in wrt {
            match gmap.get(t.0).copied().flatten() {
                Some(r) => out.push(r),
                None => {
                    let shape = self.nodes[t.0].shape.clone();
                    let zero = self.constant_from(&shape, vec![F::zero(); numel(&shape)])?;
                    out.push(zero);
                }
            }
        }
        Ok(out)
    }

    /// Differentiate a scalar `loss` with respect to every trainable leaf,
    /// storing the results in the leaves' grad slots (see
    /// [`Tape::grad_of`]). Single-shot: a second call errors.
    pub fn backward(&mut self, loss: TensorRef) -> Result<()> {
        if self.backward_done {
            return Err(Error::Tape("backward already ran on this tape".into()));
        }
        let ln = self.node(loss)?;
        if ln.data.len() != 1 {
            return Err(Error::Tape(format!("backward: loss must be scalar, got {:?}", ln.shape)));
        }
        let horizon = loss.0;
        let leaves: Vec<usize> = (0..=horizon)
            .filter(|&i| matches!(self.nodes[i].op, Op::Leaf { trainable: true }))
            .collect();
        let desc = self.descendants(&leaves, horizon);
        let anc = self.ancestors(horizon);
        let active: Vec<bool> = desc.iter().zip(&anc).map(|(&d, &a)| d && a).collect();
        if active[horizon] {
            let gmap = self.vjp(horizon, &active)?;
            for &l in &leaves {
                if let Some(gref) = gmap[l] {
                    let data = self.nodes[gref.0].data.clone();
                    self.nodes[l].grad = Some(data);
                }
            }
        }
        self.backward_done = true;
        Ok(())
    }
}
