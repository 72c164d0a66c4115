//! Differentiable computation graph over dense arrays.
//!
//! The graph is an eagerly-evaluated tape: every builder records an
//! operation node and computes its value immediately, so construction can
//! branch on intermediate values (ray marching, bilinear corner lookup)
//! exactly like an eager framework. Three derivative mechanisms exist on
//! top of the tape:
//!
//! * [`ValueGraph::backward_grad`] — one reverse sweep, returns parameter
//!   gradients as raw arrays.
//! * [`ValueGraph::input_grad`] — builds the gradient of an output w.r.t.
//!   any node *as new graph nodes*, so the result stays differentiable;
//!   a later `backward_grad` then differentiates through it (second order).
//! * [`ValueGraph::grad_of`] — raw gradient w.r.t. an arbitrary node, used
//!   by tests.
//!
//! A graph is single-owner and rebuilt per training step; parameters live
//! outside in a [`ParamStore`] and are bound as leaves at build time.

pub mod backward;
pub mod input_grad;
pub mod kernels;
pub mod layers;
#[cfg(test)]
mod tests;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorData;
use std::collections::BTreeMap;

pub use layers::{Activation, LayerKind, LayerSpec};

/// Handle to a node in a [`ValueGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// Named storage for trainable parameters, shared between model building
/// and the optimizer. Iteration order is name-sorted and deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    entries: BTreeMap<String, TensorData<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, t: TensorData<T>) {
        self.entries.insert(name.to_string(), t);
    }

    pub fn get(&self, name: &str) -> Option<&TensorData<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut TensorData<T>> {
        self.entries.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &TensorData<T>)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut TensorData<T>)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}

/// Operation recorded at each node. Node ids refer to earlier nodes only.
#[derive(Debug, Clone)]
pub enum Op<T> {
    Const,
    Param(String),
    Input(String),

    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddScalar(NodeId, T),
    MulScalar(NodeId, T),

    Neg(NodeId),
    Abs(NodeId),
    Exp(NodeId),
    Sqrt(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, T),
    Swish(NodeId),
    /// 1 where x > 0 else `slope`; derivative defined as zero.
    StepMask(NodeId, T),
    /// sign(x) in {-1, 0, 1}; derivative defined as zero.
    SignMask(NodeId),

    SumAll(NodeId),
    MeanAll(NodeId),
    /// Broadcast a scalar node to an arbitrary shape.
    BroadcastTo(NodeId, Vec<usize>),
    /// `[m,n] -> [n]`
    SumAxis0(NodeId),
    /// `[m,n] -> [m]`
    SumAxis1(NodeId),
    /// `[n] -> [m,n]` replicate rows
    ExpandRows(NodeId, usize),
    /// `[m] -> [m,n]` replicate columns
    ExpandCols(NodeId, usize),
    /// Row-wise minimum `[m,n] -> [m]`; the minimizing column per row is
    /// recorded so gradients flow through the minimizing sample.
    MinAxis1(NodeId, Vec<usize>),

    Reshape(NodeId),
    Concat(usize, Vec<NodeId>),
    Slice {
        x: NodeId,
        axis: usize,
        start: usize,
        len: usize,
    },
    /// Inverse of `Slice`: embed into zeros of the original extent.
    PadSlice {
        x: NodeId,
        axis: usize,
        start: usize,
        orig_len: usize,
    },
    Transpose2d(NodeId),
    MatMul(NodeId, NodeId),

    /// Stride-1 same-padding conv; input `[h,w,cin]`, kernel
    /// `[kh,kw,cin,cout]`, bias `[cout]`.
    Conv2d {
        x: NodeId,
        kernel: NodeId,
        bias: NodeId,
    },
    BlurPool2d(NodeId),
    Resize2x(NodeId),
    /// Gather pixel vectors from `[h,w,c]` at fixed integer locations.
    GatherPix {
        map: NodeId,
        idx: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub op: Op<T>,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
}

/// The differentiable tape. See module docs.
#[derive(Debug, Default)]
pub struct ValueGraph<T> {
    nodes: Vec<Node<T>>,
    params: Vec<(String, NodeId)>,
    inputs: Vec<(String, NodeId)>,
    /// Out-of-bounds bilinear lookups clamped during construction.
    pub oob_clamps: usize,
}

impl<T: Scalar> ValueGraph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            inputs: Vec::new(),
            oob_clamps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id.0]
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].value
    }

    pub fn scalar_value(&self, id: NodeId) -> T {
        debug_assert!(self.nodes[id.0].value.len() == 1);
        self.nodes[id.0].value[0]
    }

    pub fn params(&self) -> &[(String, NodeId)] {
        &self.params
    }

    fn push(&mut self, op: Op<T>, shape: Vec<usize>, value: Vec<T>) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, shape, value });
        id
    }

    // ---- leaves ------------------------------------------------------

    pub fn constant(&mut self, t: TensorData<T>) -> NodeId {
        self.push(Op::Const, t.shape, t.data)
    }

    pub fn constant_scalar(&mut self, v: T) -> NodeId {
        self.push(Op::Const, vec![], vec![v])
    }

    /// Bind a trainable parameter from the store as a leaf.
    pub fn param(&mut self, name: &str, store: &ParamStore<T>) -> Result<NodeId> {
        let t = store
            .get(name)
            .ok_or_else(|| Error::UnknownLeaf(name.to_string()))?;
        let id = self.push(Op::Param(name.to_string()), t.shape.clone(), t.data.clone());
        self.params.push((name.to_string(), id));
        Ok(id)
    }

    /// Bind a differentiable-but-not-trainable leaf (e.g. query points).
    pub fn input(&mut self, name: &str, t: TensorData<T>) -> NodeId {
        let id = self.push(Op::Input(name.to_string()), t.shape, t.data);
        self.inputs.push((name.to_string(), id));
        id
    }

    pub fn input_leaf(&self, name: &str) -> Option<NodeId> {
        self.inputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, id)| id)
    }

    // ---- elementwise -------------------------------------------------

    fn binary_shape(&self, a: NodeId, b: NodeId, what: &str) -> Vec<usize> {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "{what}: shape {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        self.shape(a).to_vec()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.binary_shape(a, b, "add");
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), shape, v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.binary_shape(a, b, "sub");
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), shape, v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.binary_shape(a, b, "mul");
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), shape, v)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.binary_shape(a, b, "div");
        let v = zip_map(self.value(a), self.value(b), |x, y| x / y);
        self.push(Op::Div(a, b), shape, v)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: T) -> NodeId {
        let shape = self.shape(a).to_vec();
        let v = self.value(a).iter().map(|&x| x + c).collect();
        self.push(Op::AddScalar(a, c), shape, v)
    }

    pub fn mul_scalar(&mut self, a: NodeId, c: T) -> NodeId {
        let shape = self.shape(a).to_vec();
        let v = self.value(a).iter().map(|&x| x * c).collect();
        self.push(Op::MulScalar(a, c), shape, v)
    }

    fn unary(&mut self, a: NodeId, op: Op<T>, f: impl Fn(T) -> T) -> NodeId {
        let shape = self.shape(a).to_vec();
        let v = self.value(a).iter().map(|&x| f(x)).collect();
        self.push(op, shape, v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Abs(a), |x| x.abs())
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sqrt(a), |x| x.sqrt())
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sin(a), |x| x.sin())
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Cos(a), |x| x.cos())
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid(a), sigmoid_v)
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Softplus(a), softplus_v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu(a), |x| x.max(T::zero()))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: T) -> NodeId {
        self.unary(a, Op::LeakyRelu(a, slope), |x| {
            if x > T::zero() {
                x
            } else {
                x * slope
            }
        })
    }

    pub fn swish(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Swish(a), |x| x * sigmoid_v(x))
    }

    pub fn step_mask(&mut self, a: NodeId, slope: T) -> NodeId {
        self.unary(a, Op::StepMask(a, slope), |x| {
            if x > T::zero() {
                T::one()
            } else {
                slope
            }
        })
    }

    pub fn sign_mask(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::SignMask(a), |x| {
            if x > T::zero() {
                T::one()
            } else if x < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        })
    }

    // ---- reductions / broadcast ---------------------------------------

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).iter().fold(T::zero(), |acc, &x| acc + x);
        self.push(Op::SumAll(a), vec![], vec![s])
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = T::c(self.value(a).len() as f64);
        let s = self.value(a).iter().fold(T::zero(), |acc, &x| acc + x) / n;
        self.push(Op::MeanAll(a), vec![], vec![s])
    }

    pub fn broadcast_to(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        assert!(self.value(a).len() == 1, "broadcast_to needs a scalar node");
        let v = vec![self.value(a)[0]; shape.iter().product()];
        self.push(Op::BroadcastTo(a, shape.clone()), shape, v)
    }

    pub fn sum_axis0(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.mat_dims(a);
        let av = self.value(a);
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            for (o, &x) in out.iter_mut().zip(&av[i * n..(i + 1) * n]) {
                *o += x;
            }
        }
        self.push(Op::SumAxis0(a), vec![n], out)
    }

    pub fn sum_axis1(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.mat_dims(a);
        let av = self.value(a);
        let mut out = vec![T::zero(); m];
        for (i, o) in out.iter_mut().enumerate() {
            *o = av[i * n..(i + 1) * n]
                .iter()
                .fold(T::zero(), |acc, &x| acc + x);
        }
        self.push(Op::SumAxis1(a), vec![m], out)
    }

    pub fn expand_rows(&mut self, a: NodeId, m: usize) -> NodeId {
        let n = self.shape(a)[0];
        assert_eq!(self.shape(a).len(), 1, "expand_rows needs a vector");
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(self.value(a));
        }
        self.push(Op::ExpandRows(a, m), vec![m, n], out)
    }

    pub fn expand_cols(&mut self, a: NodeId, n: usize) -> NodeId {
        assert_eq!(self.shape(a).len(), 1, "expand_cols needs a vector");
        let m = self.shape(a)[0];
        let av = self.value(a).to_vec();
        let mut out = Vec::with_capacity(m * n);
        for &x in &av {
            out.extend(std::iter::repeat(x).take(n));
        }
        self.push(Op::ExpandCols(a, n), vec![m, n], out)
    }

    pub fn min_axis1(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.mat_dims(a);
        assert!(n > 0);
        let av = self.value(a);
        let mut out = Vec::with_capacity(m);
        let mut arg = Vec::with_capacity(m);
        for i in 0..m {
            let row = &av[i * n..(i + 1) * n];
            let mut best = row[0];
            let mut bj = 0;
            for (j, &x) in row.iter().enumerate().skip(1) {
                if x < best {
                    best = x;
                    bj = j;
                }
            }
            out.push(best);
            arg.push(bj);
        }
        self.push(Op::MinAxis1(a, arg), vec![m], out)
    }

    // ---- shape ---------------------------------------------------------

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.value(a).len(),
            "reshape element count mismatch"
        );
        let v = self.value(a).to_vec();
        self.push(Op::Reshape(a), shape, v)
    }

    pub fn concat(&mut self, axis: usize, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rank = self.shape(parts[0]).len();
        assert!(axis < rank);
        let mut out_shape = self.shape(parts[0]).to_vec();
        out_shape[axis] = parts.iter().map(|&p| self.shape(p)[axis]).sum();
        for &p in parts {
            for (d, (&a, &b)) in self.shape(p).iter().zip(&out_shape).enumerate() {
                assert!(d == axis || a == b, "concat: non-axis dims must match");
            }
        }
        // outer = product of dims before axis, inner = product after
        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let pa = self.shape(p)[axis];
                let chunk = pa * inner;
                out.extend_from_slice(&self.value(p)[o * chunk..(o + 1) * chunk]);
            }
        }
        self.push(Op::Concat(axis, parts.to_vec()), out_shape, out)
    }

    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> NodeId {
        let shape = self.shape(x).to_vec();
        assert!(axis < shape.len() && start + len <= shape[axis]);
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut out = Vec::with_capacity(outer * len * inner);
        let stride = shape[axis] * inner;
        for o in 0..outer {
            let base = o * stride + start * inner;
            out.extend_from_slice(&self.value(x)[base..base + len * inner]);
        }
        self.push(Op::Slice { x, axis, start, len }, out_shape, out)
    }

    pub fn pad_slice(&mut self, x: NodeId, axis: usize, start: usize, orig_len: usize) -> NodeId {
        let shape = self.shape(x).to_vec();
        assert!(axis < shape.len() && start + shape[axis] <= orig_len);
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        let mut out_shape = shape.clone();
        out_shape[axis] = orig_len;
        let mut out = vec![T::zero(); outer * orig_len * inner];
        let stride = orig_len * inner;
        for o in 0..outer {
            let dst = o * stride + start * inner;
            let src = o * len * inner;
            out[dst..dst + len * inner].copy_from_slice(&self.value(x)[src..src + len * inner]);
        }
        self.push(
            Op::PadSlice {
                x,
                axis,
                start,
                orig_len,
            },
            out_shape,
            out,
        )
    }

    pub fn transpose2d(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.mat_dims(a);
        let v = kernels::transpose2d(self.value(a), m, n);
        self.push(Op::Transpose2d(a), vec![n, m], v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, k) = self.mat_dims(a);
        let (k2, n) = self.mat_dims(b);
        assert_eq!(k, k2, "matmul inner dims: {k} vs {k2}");
        let v = kernels::matmul(self.value(a), self.value(b), m, k, n);
        self.push(Op::MatMul(a, b), vec![m, n], v)
    }

    // ---- image ops -----------------------------------------------------

    pub fn conv2d(&mut self, x: NodeId, kernel: NodeId, bias: NodeId) -> NodeId {
        let (h, w, cin) = self.img_dims(x);
        let ks = self.shape(kernel).to_vec();
        assert_eq!(ks.len(), 4, "conv kernel must be [kh,kw,cin,cout]");
        assert_eq!(ks[2], cin, "conv kernel cin mismatch");
        let (kh, kw, cout) = (ks[0], ks[1], ks[3]);
        assert_eq!(self.shape(bias), &[cout], "conv bias shape");
        let v = kernels::conv2d(
            self.value(x),
            self.value(kernel),
            self.value(bias),
            h,
            w,
            cin,
            kh,
            kw,
            cout,
        );
        self.push(Op::Conv2d { x, kernel, bias }, vec![h, w, cout], v)
    }

    pub fn blurpool2d(&mut self, x: NodeId) -> NodeId {
        let (h, w, c) = self.img_dims(x);
        assert!(h % 2 == 0 && w % 2 == 0, "blurpool needs even spatial dims");
        let v = kernels::blurpool2d(self.value(x), h, w, c);
        self.push(Op::BlurPool2d(x), vec![h / 2, w / 2, c], v)
    }

    pub fn resize2x(&mut self, x: NodeId) -> NodeId {
        let (h, w, c) = self.img_dims(x);
        let v = kernels::resize2x(self.value(x), h, w, c);
        self.push(Op::Resize2x(x), vec![2 * h, 2 * w, c], v)
    }

    pub fn gather_pix(&mut self, map: NodeId, idx: Vec<(usize, usize)>) -> NodeId {
        let (h, w, c) = self.img_dims(map);
        let mut out = Vec::with_capacity(idx.len() * c);
        for &(y, x) in &idx {
            assert!(y < h && x < w, "gather_pix index out of bounds");
            let base = (y * w + x) * c;
            out.extend_from_slice(&self.value(map)[base..base + c]);
        }
        let n = idx.len();
        self.push(Op::GatherPix { map, idx }, vec![n, c], out)
    }

    // ---- helpers -------------------------------------------------------

    pub(crate) fn mat_dims(&self, a: NodeId) -> (usize, usize) {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "expected rank-2 node, got {s:?}");
        (s[0], s[1])
    }

    pub(crate) fn img_dims(&self, a: NodeId) -> (usize, usize, usize) {
        let s = self.shape(a);
        assert_eq!(s.len(), 3, "expected rank-3 image node, got {s:?}");
        (s[0], s[1], s[2])
    }
}

fn zip_map<T: Scalar>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

pub(crate) fn sigmoid_v<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable ln(1 + e^x).
pub(crate) fn softplus_v<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (T::one() + (-x.abs()).exp()).ln()
}
