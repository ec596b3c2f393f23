//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its value and the ids of its
//! parents. Parents always precede children, so [`Tape::backward`] can walk
//! the nodes in reverse creation order.

use std::cell::RefCell;
use std::rc::Rc;

use super::kernels::{self, conv_out, ConvGeom};
use super::value::{shape_str, Element, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Affine(usize, T, T),
    AddBias(usize, usize),
    MatMul(usize, usize),
    Conv2d {
        x: usize,
        w: usize,
        stride: usize,
        pad: usize,
    },
    ConvTranspose2d {
        x: usize,
        w: usize,
        stride: usize,
        pad: usize,
    },
    LeakyRelu(usize, T),
    Sigmoid(usize),
    Tanh(usize),
    Abs(usize),
    Sum(usize),
    Mean(usize),
    AbsSum(usize),
    Reshape(usize),
    Concat {
        parts: Vec<usize>,
        axis: usize,
    },
    Narrow {
        x: usize,
        axis: usize,
        start: usize,
    },
    BceWithLogits {
        x: usize,
        target: T,
    },
    /// `inv_std` holds one `1/sqrt(var + eps)` per `(n, c)` plane.
    InstanceNorm {
        x: usize,
        inv_std: Vec<T>,
    },
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
}

/// Records operations for one forward pass. Single-threaded by construction.
pub struct Tape<T: Element = f32> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Element = f32> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Element> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf)
    }

    /// A new leaf sharing `v`'s value; gradients do not flow back through it.
    pub fn detach<'t>(&'t self, v: Var<'t, T>) -> Var<'t, T> {
        let value = self.value_of(v.id);
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Gradients of a scalar `loss` with respect to every node on the tape.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {}",
                shape_str(root.value.shape())
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(Tensor::full(root.value.shape(), T::one()));

        for id in (0..=loss.id).rev() {
            let (lower, upper) = grads.split_at_mut(id);
            let Some(g) = upper[0].as_ref() else { continue };
            let node = &nodes[id];
            backprop(&nodes, node, g.data(), lower);
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Tape::backward`], indexed by [`Var`].
pub struct Gradients<T: Element = f32> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Gradients<T> {
    /// Gradient for `v`, or `None` when the loss does not depend on it.
    pub fn get(&self, v: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zero-filled when the loss does not depend on it.
    pub fn wrt(&self, v: Var<'_, T>) -> Tensor<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&v.shape()))
    }
}

fn slot<'a, T: Element>(
    grads: &'a mut [Option<Tensor<T>>],
    nodes: &[Node<T>],
    id: usize,
) -> &'a mut [T] {
    grads[id]
        .get_or_insert_with(|| Tensor::zeros(nodes[id].value.shape()))
        .data_mut()
}

fn backprop<T: Element>(
    nodes: &[Node<T>],
    node: &Node<T>,
    g: &[T],
    grads: &mut [Option<Tensor<T>>],
) {
    match node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            for (d, &gv) in slot(grads, nodes, a).iter_mut().zip(g) {
                *d = *d + gv;
            }
            for (d, &gv) in slot(grads, nodes, b).iter_mut().zip(g) {
                *d = *d + gv;
            }
        }
        Op::Sub(a, b) => {
            for (d, &gv) in slot(grads, nodes, a).iter_mut().zip(g) {
                *d = *d + gv;
            }
            for (d, &gv) in slot(grads, nodes, b).iter_mut().zip(g) {
                *d = *d - gv;
            }
        }
        Op::Mul(a, b) => {
            let av = Rc::clone(&nodes[a].value);
            let bv = Rc::clone(&nodes[b].value);
            for ((d, &gv), &y) in slot(grads, nodes, a).iter_mut().zip(g).zip(bv.data()) {
                *d = *d + gv * y;
            }
            for ((d, &gv), &x) in slot(grads, nodes, b).iter_mut().zip(g).zip(av.data()) {
                *d = *d + gv * x;
            }
        }
        Op::Affine(a, s, _) => {
            for (d, &gv) in slot(grads, nodes, a).iter_mut().zip(g) {
                *d = *d + gv * s;
            }
        }
        Op::AddBias(x, b) => {
            for (d, &gv) in slot(grads, nodes, x).iter_mut().zip(g) {
                *d = *d + gv;
            }
            let shape = nodes[x].value.shape().to_vec();
            let (n, c) = (shape[0], shape[1]);
            let inner: usize = shape[2..].iter().product();
            let db = slot(grads, nodes, b);
            for ni in 0..n {
                for ci in 0..c {
                    let start = (ni * c + ci) * inner;
                    db[ci] = db[ci] + kernels::sum(&g[start..start + inner]);
                }
            }
        }
        Op::MatMul(a, b) => {
            let av = Rc::clone(&nodes[a].value);
            let bv = Rc::clone(&nodes[b].value);
            let (m, k) = (av.shape()[0], av.shape()[1]);
            let n = bv.shape()[1];
            kernels::gemm_nt(m, k, n, g, bv.data(), slot(grads, nodes, a));
            kernels::gemm_tn(k, n, m, av.data(), g, slot(grads, nodes, b));
        }
        Op::Conv2d { x, w, stride, pad } => {
            let xv = Rc::clone(&nodes[x].value);
            let wv = Rc::clone(&nodes[w].value);
            let geom = conv_geom(xv.shape(), wv.shape()[2], stride, pad);
            let o = wv.shape()[0];
            let n = xv.shape()[0];
            let in_size = geom.channels * geom.in_h * geom.in_w;
            let out_size = o * geom.cols();
            let mut cols = vec![T::zero(); geom.rows() * geom.cols()];
            let mut dcols = vec![T::zero(); geom.rows() * geom.cols()];
            let mut dw = vec![T::zero(); wv.numel()];
            let mut dx = vec![T::zero(); xv.numel()];
            for ni in 0..n {
                let gout = &g[ni * out_size..(ni + 1) * out_size];
                kernels::im2col(
                    &xv.data()[ni * in_size..(ni + 1) * in_size],
                    &geom,
                    &mut cols,
                );
                kernels::gemm_nt(o, geom.rows(), geom.cols(), gout, &cols, &mut dw);
                dcols.fill(T::zero());
                kernels::gemm_tn(geom.rows(), geom.cols(), o, wv.data(), gout, &mut dcols);
                kernels::col2im(&dcols, &geom, &mut dx[ni * in_size..(ni + 1) * in_size]);
            }
            add_into(slot(grads, nodes, w), &dw);
            add_into(slot(grads, nodes, x), &dx);
        }
        Op::ConvTranspose2d { x, w, stride, pad } => {
            let xv = Rc::clone(&nodes[x].value);
            let wv = Rc::clone(&nodes[w].value);
            let out_shape = node.value.shape();
            let (n, c, h, wd) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
            let o = out_shape[1];
            let geom = ConvGeom {
                channels: o,
                in_h: out_shape[2],
                in_w: out_shape[3],
                kernel: wv.shape()[2],
                stride,
                pad,
                out_h: h,
                out_w: wd,
            };
            let in_size = c * h * wd;
            let out_size = o * out_shape[2] * out_shape[3];
            let mut gcols = vec![T::zero(); geom.rows() * geom.cols()];
            let mut dw = vec![T::zero(); wv.numel()];
            let mut dx = vec![T::zero(); xv.numel()];
            for ni in 0..n {
                kernels::im2col(&g[ni * out_size..(ni + 1) * out_size], &geom, &mut gcols);
                let xs = &xv.data()[ni * in_size..(ni + 1) * in_size];
                kernels::gemm_nn(
                    c,
                    geom.cols(),
                    geom.rows(),
                    wv.data(),
                    &gcols,
                    &mut dx[ni * in_size..(ni + 1) * in_size],
                );
                kernels::gemm_nt(c, geom.rows(), geom.cols(), xs, &gcols, &mut dw);
            }
            add_into(slot(grads, nodes, w), &dw);
            add_into(slot(grads, nodes, x), &dx);
        }
        Op::LeakyRelu(x, alpha) => {
            let xv = Rc::clone(&nodes[x].value);
            for ((d, &gv), &v) in slot(grads, nodes, x).iter_mut().zip(g).zip(xv.data()) {
                *d = *d + if v > T::zero() { gv } else { gv * alpha };
            }
        }
        Op::Sigmoid(x) => {
            let y = &node.value;
            for ((d, &gv), &s) in slot(grads, nodes, x).iter_mut().zip(g).zip(y.data()) {
                *d = *d + gv * s * (T::one() - s);
            }
        }
        Op::Tanh(x) => {
            let y = &node.value;
            for ((d, &gv), &t) in slot(grads, nodes, x).iter_mut().zip(g).zip(y.data()) {
                *d = *d + gv * (T::one() - t * t);
            }
        }
        Op::Abs(x) => {
            let xv = Rc::clone(&nodes[x].value);
            for ((d, &gv), &v) in slot(grads, nodes, x).iter_mut().zip(g).zip(xv.data()) {
                *d = *d + gv * sign(v);
            }
        }
        Op::Sum(x) => {
            let gv = g[0];
            for d in slot(grads, nodes, x).iter_mut() {
                *d = *d + gv;
            }
        }
        Op::Mean(x) => {
            let n = T::of(nodes[x].value.numel() as f64);
            let gv = g[0] / n;
            for d in slot(grads, nodes, x).iter_mut() {
                *d = *d + gv;
            }
        }
        Op::AbsSum(x) => {
            let xv = Rc::clone(&nodes[x].value);
            let gv = g[0];
            for (d, &v) in slot(grads, nodes, x).iter_mut().zip(xv.data()) {
                *d = *d + gv * sign(v);
            }
        }
        Op::Reshape(x) => add_into(slot(grads, nodes, x), g),
        Op::Concat { ref parts, axis } => {
            let out_shape = node.value.shape();
            let outer: usize = out_shape[..axis].iter().product();
            let inner: usize = out_shape[axis + 1..].iter().product();
            let total = out_shape[axis] * inner;
            let mut offset = 0;
            for &p in parts {
                let len = nodes[p].value.shape()[axis] * inner;
                let d = slot(grads, nodes, p);
                for o in 0..outer {
                    add_into(
                        &mut d[o * len..(o + 1) * len],
                        &g[o * total + offset..o * total + offset + len],
                    );
                }
                offset += len;
            }
        }
        Op::Narrow { x, axis, start } => {
            let in_shape = nodes[x].value.shape().to_vec();
            let out_len = node.value.shape()[axis];
            let outer: usize = in_shape[..axis].iter().product();
            let inner: usize = in_shape[axis + 1..].iter().product();
            let total = in_shape[axis] * inner;
            let len = out_len * inner;
            let d = slot(grads, nodes, x);
            for o in 0..outer {
                let base = o * total + start * inner;
                add_into(&mut d[base..base + len], &g[o * len..(o + 1) * len]);
            }
        }
        Op::InstanceNorm { x, ref inv_std } => {
            // dx = inv_std * (g - mean(g) - y * mean(g * y)) per plane
            let y = node.value.data();
            let plane = y.len() / inv_std.len();
            let inv_n = T::one() / T::of(plane as f64);
            let d = slot(grads, nodes, x);
            for (p, &s) in inv_std.iter().enumerate() {
                let r = p * plane..(p + 1) * plane;
                let (gp, yp) = (&g[r.clone()], &y[r.clone()]);
                let mean_g = kernels::sum(gp) * inv_n;
                let mean_gy = kernels::dot(gp, yp) * inv_n;
                for ((dv, &gv), &yv) in d[r].iter_mut().zip(gp).zip(yp) {
                    *dv = *dv + s * (gv - mean_g - yv * mean_gy);
                }
            }
        }
        Op::BceWithLogits { x, target } => {
            let xv = Rc::clone(&nodes[x].value);
            let scale = g[0] / T::of(xv.numel() as f64);
            for (d, &v) in slot(grads, nodes, x).iter_mut().zip(xv.data()) {
                *d = *d + (sigmoid(v) - target) * scale;
            }
        }
    }
}

fn add_into<T: Element>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

fn sign<T: Element>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn sigmoid<T: Element>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^v)` without overflow.
fn softplus<T: Element>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}

fn conv_geom(x_shape: &[usize], kernel: usize, stride: usize, pad: usize) -> ConvGeom {
    let (c, h, w) = (x_shape[1], x_shape[2], x_shape[3]);
    ConvGeom {
        channels: c,
        in_h: h,
        in_w: w,
        kernel,
        stride,
        pad,
        out_h: conv_out(h, kernel, stride, pad).expect("validated"),
        out_w: conv_out(w, kernel, stride, pad).expect("validated"),
    }
}

fn mismatch(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape(format!("{op}: {} vs {}", shape_str(a), shape_str(b)))
}

impl<'t, T: Element> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// The value of a one-element variable.
    pub fn item(&self) -> T {
        self.value().item()
    }

    fn unary(self, op: Op<T>, f: impl Fn(T) -> T) -> Var<'t, T> {
        let v = self.value();
        let data = v.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        self.tape.push(out, op)
    }

    fn binary(
        self,
        other: Var<'t, T>,
        name: &str,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var<'t, T>> {
        let a = self.value();
        let b = other.value();
        if a.shape() != b.shape() {
            return Err(mismatch(name, a.shape(), b.shape()));
        }
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.tape.push(Tensor::new(a.shape().to_vec(), data)?, op))
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, "add", Op::Add(self.id, other.id), |x, y| x + y)
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, "sub", Op::Sub(self.id, other.id), |x, y| x - y)
    }

    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, "mul", Op::Mul(self.id, other.id), |x, y| x * y)
    }

    pub fn scale(self, s: T) -> Var<'t, T> {
        self.affine(s, T::zero())
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(self, scale: T, shift: T) -> Var<'t, T> {
        self.unary(Op::Affine(self.id, scale, shift), |x| x * scale + shift)
    }

    /// Adds a per-channel bias `[C]` to `[N, C, ...]`; the only broadcasting op.
    pub fn add_bias(self, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        let x = self.value();
        let b = bias.value();
        let shape = x.shape();
        if shape.len() < 2 || b.shape() != [shape[1]] {
            return Err(mismatch("add_bias", shape, b.shape()));
        }
        let inner: usize = shape[2..].iter().product();
        let c = shape[1];
        let mut data = x.data().to_vec();
        for (i, chunk) in data.chunks_mut(inner).enumerate() {
            let bv = b.data()[i % c];
            for v in chunk {
                *v = *v + bv;
            }
        }
        Ok(self.tape.push(
            Tensor::new(shape.to_vec(), data)?,
            Op::AddBias(self.id, bias.id),
        ))
    }

    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let a = self.value();
        let b = other.value();
        if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(mismatch("matmul", a.shape(), b.shape()));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![T::zero(); m * n];
        kernels::gemm_nn(m, n, k, a.data(), b.data(), &mut out);
        Ok(self
            .tape
            .push(Tensor::new(vec![m, n], out)?, Op::MatMul(self.id, other.id)))
    }

    /// Cross-correlation of `[N, C, H, W]` with weights `[O, C, k, k]`.
    pub fn conv2d(self, weight: Var<'t, T>, stride: usize, pad: usize) -> Result<Var<'t, T>> {
        let x = self.value();
        let w = weight.value();
        let (xs, ws) = (x.shape(), w.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || ws[2] != ws[3] {
            return Err(mismatch("conv2d", xs, ws));
        }
        if conv_out(xs[2], ws[2], stride, pad).is_none()
            || conv_out(xs[3], ws[2], stride, pad).is_none()
        {
            return Err(mismatch("conv2d (kernel larger than padded input)", xs, ws));
        }
        let geom = conv_geom(xs, ws[2], stride, pad);
        let (n, o) = (xs[0], ws[0]);
        let in_size = geom.channels * geom.in_h * geom.in_w;
        let out_size = o * geom.cols();
        let mut cols = vec![T::zero(); geom.rows() * geom.cols()];
        let mut out = vec![T::zero(); n * out_size];
        for ni in 0..n {
            kernels::im2col(
                &x.data()[ni * in_size..(ni + 1) * in_size],
                &geom,
                &mut cols,
            );
            kernels::gemm_nn(
                o,
                geom.cols(),
                geom.rows(),
                w.data(),
                &cols,
                &mut out[ni * out_size..(ni + 1) * out_size],
            );
        }
        Ok(self.tape.push(
            Tensor::new(vec![n, o, geom.out_h, geom.out_w], out)?,
            Op::Conv2d {
                x: self.id,
                w: weight.id,
                stride,
                pad,
            },
        ))
    }

    /// Transposed convolution of `[N, C, H, W]` with weights `[C, O, k, k]`;
    /// output side is `(H - 1) * stride - 2 * pad + k`.
    pub fn conv_transpose2d(
        self,
        weight: Var<'t, T>,
        stride: usize,
        pad: usize,
    ) -> Result<Var<'t, T>> {
        let x = self.value();
        let w = weight.value();
        let (xs, ws) = (x.shape(), w.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[0] || ws[2] != ws[3] || stride == 0 {
            return Err(mismatch("conv_transpose2d", xs, ws));
        }
        let k = ws[2];
        let out_dim = |s: usize| {
            ((s - 1) * stride + k)
                .checked_sub(2 * pad)
                .filter(|&v| v > 0)
        };
        let (Some(oh), Some(ow)) = (out_dim(xs[2]), out_dim(xs[3])) else {
            return Err(mismatch("conv_transpose2d (empty output)", xs, ws));
        };
        let (n, c, h, wd, o) = (xs[0], xs[1], xs[2], xs[3], ws[1]);
        let geom = ConvGeom {
            channels: o,
            in_h: oh,
            in_w: ow,
            kernel: k,
            stride,
            pad,
            out_h: h,
            out_w: wd,
        };
        // the adjoint geometry must reproduce the input extent exactly
        if conv_out(oh, k, stride, pad) != Some(h) || conv_out(ow, k, stride, pad) != Some(wd) {
            return Err(mismatch("conv_transpose2d (inexact geometry)", xs, ws));
        }
        let in_size = c * h * wd;
        let out_size = o * oh * ow;
        let mut cols = vec![T::zero(); geom.rows() * geom.cols()];
        let mut out = vec![T::zero(); n * out_size];
        for ni in 0..n {
            cols.fill(T::zero());
            kernels::gemm_tn(
                geom.rows(),
                geom.cols(),
                c,
                w.data(),
                &x.data()[ni * in_size..(ni + 1) * in_size],
                &mut cols,
            );
            kernels::col2im(&cols, &geom, &mut out[ni * out_size..(ni + 1) * out_size]);
        }
        Ok(self.tape.push(
            Tensor::new(vec![n, o, oh, ow], out)?,
            Op::ConvTranspose2d {
                x: self.id,
                w: weight.id,
                stride,
                pad,
            },
        ))
    }

    pub fn leaky_relu(self, alpha: T) -> Var<'t, T> {
        self.unary(Op::LeakyRelu(self.id, alpha), |x| {
            if x > T::zero() {
                x
            } else {
                x * alpha
            }
        })
    }

    pub fn relu(self) -> Var<'t, T> {
        self.leaky_relu(T::zero())
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.unary(Op::Tanh(self.id), |x| x.tanh())
    }

    pub fn abs(self) -> Var<'t, T> {
        self.unary(Op::Abs(self.id), |x| x.abs())
    }

    fn reduce(self, op: Op<T>, f: impl Fn(&[T]) -> T) -> Var<'t, T> {
        let v = self.value();
        self.tape.push(Tensor::scalar(f(v.data())), op)
    }

    pub fn sum(self) -> Var<'t, T> {
        self.reduce(Op::Sum(self.id), kernels::sum)
    }

    pub fn mean(self) -> Var<'t, T> {
        self.reduce(Op::Mean(self.id), |d| {
            kernels::sum(d) / T::of(d.len() as f64)
        })
    }

    pub fn abs_sum(self) -> Var<'t, T> {
        self.reduce(Op::AbsSum(self.id), |d| {
            d.iter().fold(T::zero(), |acc, &v| acc + v.abs())
        })
    }

    /// Mean binary cross-entropy of logits against a constant target in [0, 1].
    pub fn bce_with_logits(self, target: T) -> Var<'t, T> {
        self.reduce(Op::BceWithLogits { x: self.id, target }, |d| {
            let total = d
                .iter()
                .fold(T::zero(), |acc, &v| acc + softplus(v) - v * target);
            total / T::of(d.len() as f64)
        })
    }

    /// Normalizes each `[H, W]` plane of an `[N, C, H, W]` tensor to zero
    /// mean and unit variance.
    pub fn instance_norm(self, eps: T) -> Result<Var<'t, T>> {
        let v = self.value();
        let shape = v.shape();
        if shape.len() != 4 {
            return Err(Error::Shape(format!(
                "instance_norm needs [N, C, H, W], got {}",
                shape_str(shape)
            )));
        }
        let plane = shape[2] * shape[3];
        let inv_n = T::one() / T::of(plane as f64);
        let mut out = Vec::with_capacity(v.numel());
        let mut inv_std = Vec::with_capacity(shape[0] * shape[1]);
        for xs in v.data().chunks(plane) {
            let mean = kernels::sum(xs) * inv_n;
            let var = xs
                .iter()
                .fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean))
                * inv_n;
            let s = T::one() / (var + eps).sqrt();
            out.extend(xs.iter().map(|&x| (x - mean) * s));
            inv_std.push(s);
        }
        Ok(self.tape.push(
            Tensor::new(shape.to_vec(), out)?,
            Op::InstanceNorm {
                x: self.id,
                inv_std,
            },
        ))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t, T>> {
        let v = (*self.value()).clone().reshape(shape)?;
        Ok(self.tape.push(v, Op::Reshape(self.id)))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(self, axis: usize, start: usize, len: usize) -> Result<Var<'t, T>> {
        let v = self.value();
        let shape = v.shape();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(Error::Shape(format!(
                "narrow({axis}, {start}, {len}) out of range for {}",
                shape_str(shape)
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let total = shape[axis] * inner;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * total + start * inner;
            data.extend_from_slice(&v.data()[base..base + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        Ok(self.tape.push(
            Tensor::new(out_shape, data)?,
            Op::Narrow {
                x: self.id,
                axis,
                start,
            },
        ))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<'t, T>], axis: usize) -> Result<Var<'t, T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let tape = first.tape;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let base = values[0].shape().to_vec();
        if axis >= base.len() {
            return Err(Error::Shape(format!(
                "concat axis {axis} out of range for {}",
                shape_str(&base)
            )));
        }
        for v in &values[1..] {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(mismatch("concat", &base, s));
            }
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let total: usize = values.iter().map(|v| v.shape()[axis]).sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in &values {
                let len = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * len..(o + 1) * len]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        Ok(tape.push(
            Tensor::new(shape, data)?,
            Op::Concat {
                parts: parts.iter().map(|p| p.id).collect(),
                axis,
            },
        ))
    }

    /// `mean(|self - other|)`.
    pub fn mean_abs_diff(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let n = self.value().numel();
        Ok(self.sub(other)?.abs_sum().scale(T::one() / T::of(n as f64)))
    }
}
