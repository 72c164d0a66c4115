//! Reverse sweep: raw vector-Jacobian products for every op.

use super::kernels;
use super::{sigmoid_v, NodeId, Op, ValueGraph};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::HashMap;

/// Gradients from one reverse sweep, keyed by node.
pub struct Adjoints<T> {
    buf: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Adjoints<T> {
    pub fn get(&self, id: NodeId) -> Option<&[T]> {
        self.buf[id.0].as_deref()
    }
}

impl<T: Scalar> ValueGraph<T> {
    /// Gradient of the scalar `output` w.r.t. every trainable parameter.
    pub fn backward_grad(&self, output: NodeId) -> Result<HashMap<String, Vec<T>>> {
        let adj = self.backward_sweep(output)?;
        let mut grads = HashMap::new();
        for (name, id) in self.params() {
            let g = adj
                .get(*id)
                .map(|s| s.to_vec())
                .unwrap_or_else(|| vec![T::zero(); self.value(*id).len()]);
            grads.insert(name.clone(), g);
        }
        Ok(grads)
    }

    /// Raw gradient of the scalar `output` w.r.t. an arbitrary node.
    pub fn grad_of(&self, output: NodeId, wrt: NodeId) -> Result<Vec<T>> {
        let adj = self.backward_sweep(output)?;
        Ok(adj
            .get(wrt)
            .map(|s| s.to_vec())
            .unwrap_or_else(|| vec![T::zero(); self.value(wrt).len()]))
    }

    fn backward_sweep(&self, output: NodeId) -> Result<Adjoints<T>> {
        if self.value(output).len() != 1 {
            return Err(Error::NonScalarOutput(self.shape(output).to_vec()));
        }
        let mut adj: Vec<Option<Vec<T>>> = vec![None; self.len()];
        adj[output.0] = Some(vec![T::one()]);

        for i in (0..=output.0).rev() {
            let Some(dy) = adj[i].take() else { continue };
            self.vjp(i, &dy, &mut adj);
            adj[i] = Some(dy);
        }
        Ok(Adjoints { buf: adj })
    }

    fn vjp(&self, i: usize, dy: &[T], adj: &mut [Option<Vec<T>>]) {
        let node = &self.node(NodeId(i));
        let acc = |adj: &mut [Option<Vec<T>>], id: NodeId, contrib: Vec<T>| {
            match &mut adj[id.0] {
                Some(buf) => {
                    for (b, c) in buf.iter_mut().zip(contrib) {
                        *b += c;
                    }
                }
                slot => {
                    *slot = Some(contrib);
                }
            }
        };
        match &node.op {
            Op::Const | Op::Param(_) | Op::Input(_) => {}

            Op::Add(a, b) => {
                acc(adj, *a, dy.to_vec());
                acc(adj, *b, dy.to_vec());
            }
            Op::Sub(a, b) => {
                acc(adj, *a, dy.to_vec());
                acc(adj, *b, dy.iter().map(|&g| -g).collect());
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                acc(adj, *a, dy.iter().zip(bv).map(|(&g, &y)| g * y).collect());
                acc(adj, *b, dy.iter().zip(av).map(|(&g, &x)| g * x).collect());
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                let yv = &node.value; // a / b
                acc(adj, *a, dy.iter().zip(bv).map(|(&g, &y)| g / y).collect());
                acc(
                    adj,
                    *b,
                    dy.iter()
                        .zip(yv.iter().zip(bv))
                        .map(|(&g, (&q, &y))| -g * q / y)
                        .collect(),
                );
            }
            Op::AddScalar(a, _) => acc(adj, *a, dy.to_vec()),
            Op::MulScalar(a, c) => acc(adj, *a, dy.iter().map(|&g| g * *c).collect()),

            Op::Neg(a) => acc(adj, *a, dy.iter().map(|&g| -g).collect()),
            Op::Abs(a) => {
                let av = self.value(*a);
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(av)
                        .map(|(&g, &x)| {
                            if x > T::zero() {
                                g
                            } else if x < T::zero() {
                                -g
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                );
            }
            Op::Exp(a) => {
                acc(
                    adj,
                    *a,
                    dy.iter().zip(&node.value).map(|(&g, &y)| g * y).collect(),
                );
            }
            Op::Sqrt(a) => {
                let tiny = T::c(1e-12);
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(&node.value)
                        .map(|(&g, &y)| g / ((y + y) + tiny))
                        .collect(),
                );
            }
            Op::Sin(a) => {
                let av = self.value(*a);
                acc(adj, *a, dy.iter().zip(av).map(|(&g, &x)| g * x.cos()).collect());
            }
            Op::Cos(a) => {
                let av = self.value(*a);
                acc(
                    adj,
                    *a,
                    dy.iter().zip(av).map(|(&g, &x)| -g * x.sin()).collect(),
                );
            }
            Op::Sigmoid(a) => {
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(&node.value)
                        .map(|(&g, &s)| g * s * (T::one() - s))
                        .collect(),
                );
            }
            Op::Softplus(a) => {
                let av = self.value(*a);
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(av)
                        .map(|(&g, &x)| g * sigmoid_v(x))
                        .collect(),
                );
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(av)
                        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                        .collect(),
                );
            }
            Op::LeakyRelu(a, slope) => {
                let av = self.value(*a);
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(av)
                        .map(|(&g, &x)| if x > T::zero() { g } else { g * *slope })
                        .collect(),
                );
            }
            Op::Swish(a) => {
                let av = self.value(*a);
                acc(
                    adj,
                    *a,
                    dy.iter()
                        .zip(av)
                        .map(|(&g, &x)| {
                            let s = sigmoid_v(x);
                            g * s * (T::one() + x * (T::one() - s))
                        })
                        .collect(),
                );
            }
            Op::StepMask(..) | Op::SignMask(_) => {}

            Op::SumAll(a) => {
                let n = self.value(*a).len();
                acc(adj, *a, vec![dy[0]; n]);
            }
            Op::MeanAll(a) => {
                let n = self.value(*a).len();
                let g = dy[0] / T::c(n as f64);
                acc(adj, *a, vec![g; n]);
            }
            Op::BroadcastTo(a, _) => {
                let s = dy.iter().fold(T::zero(), |acc2, &g| acc2 + g);
                acc(adj, *a, vec![s]);
            }
            Op::SumAxis0(a) => {
                let (m, n) = self.mat_dims(*a);
                let mut out = Vec::with_capacity(m * n);
                for _ in 0..m {
                    out.extend_from_slice(dy);
                }
                acc(adj, *a, out);
            }
            Op::SumAxis1(a) => {
                let (m, n) = self.mat_dims(*a);
                let mut out = Vec::with_capacity(m * n);
                for i in 0..m {
                    out.extend(std::iter::repeat(dy[i]).take(n));
                }
                acc(adj, *a, out);
            }
            Op::ExpandRows(a, m) => {
                let n = self.value(*a).len();
                let mut out = vec![T::zero(); n];
                for r in 0..*m {
                    for (o, &g) in out.iter_mut().zip(&dy[r * n..(r + 1) * n]) {
                        *o += g;
                    }
                }
                acc(adj, *a, out);
            }
            Op::ExpandCols(a, n) => {
                let m = self.value(*a).len();
                let mut out = vec![T::zero(); m];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dy[i * n..(i + 1) * n]
                        .iter()
                        .fold(T::zero(), |acc2, &g| acc2 + g);
                }
                acc(adj, *a, out);
            }
            Op::MinAxis1(a, arg) => {
                let (m, n) = self.mat_dims(*a);
                let mut out = vec![T::zero(); m * n];
                for i in 0..m {
                    out[i * n + arg[i]] = dy[i];
                }
                acc(adj, *a, out);
            }

            Op::Reshape(a) => acc(adj, *a, dy.to_vec()),
            Op::Concat(axis, parts) => {
                let out_shape = &node.shape;
                let outer: usize = out_shape[..*axis].iter().product();
                let inner: usize = out_shape[*axis + 1..].iter().product();
                let total_axis = out_shape[*axis];
                let mut offset = 0usize;
                for &p in parts {
                    let pa = self.shape(p)[*axis];
                    let mut contrib = Vec::with_capacity(outer * pa * inner);
                    for o in 0..outer {
                        let base = (o * total_axis + offset) * inner;
                        contrib.extend_from_slice(&dy[base..base + pa * inner]);
                    }
                    acc(adj, p, contrib);
                    offset += pa;
                }
            }
            Op::Slice {
                x,
                axis,
                start,
                len,
            } => {
                let xs = self.shape(*x).to_vec();
                let outer: usize = xs[..*axis].iter().product();
                let inner: usize = xs[*axis + 1..].iter().product();
                let mut out = vec![T::zero(); self.value(*x).len()];
                let stride = xs[*axis] * inner;
                for o in 0..outer {
                    let dst = o * stride + start * inner;
                    let src = o * len * inner;
                    out[dst..dst + len * inner].copy_from_slice(&dy[src..src + len * inner]);
                }
                acc(adj, *x, out);
            }
            Op::PadSlice {
                x,
                axis,
                start,
                orig_len,
            } => {
                let xs = self.shape(*x).to_vec();
                let outer: usize = xs[..*axis].iter().product();
                let inner: usize = xs[*axis + 1..].iter().product();
                let len = xs[*axis];
                let mut out = vec![T::zero(); self.value(*x).len()];
                let stride = orig_len * inner;
                for o in 0..outer {
                    let src = o * stride + start * inner;
                    let dst = o * len * inner;
                    out[dst..dst + len * inner].copy_from_slice(&dy[src..src + len * inner]);
                }
                acc(adj, *x, out);
            }
            Op::Transpose2d(a) => {
                let (m, n) = self.mat_dims(*a);
                acc(adj, *a, kernels::transpose2d(dy, n, m));
            }
            Op::MatMul(a, b) => {
                let (m, k) = self.mat_dims(*a);
                let (_, n) = self.mat_dims(*b);
                // dA = dY * B^T, dB = A^T * dY
                acc(adj, *a, kernels::matmul_nt(dy, self.value(*b), m, n, k));
                acc(adj, *b, kernels::matmul_tn(self.value(*a), dy, k, m, n));
            }

            Op::Conv2d { x, kernel, bias } => {
                let (h, w, cin) = self.img_dims(*x);
                let ks = self.shape(*kernel);
                let (kh, kw, cout) = (ks[0], ks[1], ks[3]);
                acc(
                    adj,
                    *x,
                    kernels::conv2d_backward_input(dy, self.value(*kernel), h, w, cin, kh, kw, cout),
                );
                acc(
                    adj,
                    *kernel,
                    kernels::conv2d_backward_kernel(self.value(*x), dy, h, w, cin, kh, kw, cout),
                );
                acc(adj, *bias, kernels::conv2d_backward_bias(dy, h * w, cout));
            }
            Op::BlurPool2d(a) => {
                let (h, w, c) = self.img_dims(*a);
                acc(adj, *a, kernels::blurpool2d_backward(dy, h, w, c));
            }
            Op::Resize2x(a) => {
                let (h, w, c) = self.img_dims(*a);
                acc(adj, *a, kernels::resize2x_backward(dy, h, w, c));
            }
            Op::GatherPix { map, idx } => {
                let (h, w, c) = self.img_dims(*map);
                let mut out = vec![T::zero(); h * w * c];
                for (row, &(y, x)) in idx.iter().enumerate() {
                    let base = (y * w + x) * c;
                    for (o, &g) in out[base..base + c].iter_mut().zip(&dy[row * c..(row + 1) * c]) {
                        *o += g;
                    }
                }
                acc(adj, *map, out);
            }
        }
    }
}
