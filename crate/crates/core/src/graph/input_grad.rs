//! Differentiation that stays inside the graph.
//!
//! `input_grad` walks the tape backward from an output and *records* the
//! adjoint computation as new nodes built from the same primitives. The
//! returned node therefore remains differentiable: a subsequent
//! [`ValueGraph::backward_grad`] sweep over the extended tape yields
//! parameter gradients of expressions containing the input gradient
//! (reverse-over-reverse).

use super::{NodeId, Op, ValueGraph};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorData;

impl<T: Scalar> ValueGraph<T> {
    /// Gradient of `sum(output)` w.r.t. the node `wrt`, returned as a new
    /// graph node of `wrt`'s shape.
    ///
    /// When the rows of `output` each depend on only the matching row of
    /// `wrt` (true for all per-point networks here), the result holds the
    /// per-row gradients.
    pub fn input_grad(&mut self, output: NodeId, wrt: NodeId) -> Result<NodeId> {
        if wrt.0 >= self.len() || output.0 >= self.len() {
            return Err(Error::UnknownLeaf(format!(
                "node id out of range (graph has {} nodes)",
                self.len()
            )));
        }
        let active = self.active_set(output, wrt);
        if !active[output.0] {
            // no path: gradient is identically zero
            let shape = self.shape(wrt).to_vec();
            return Ok(self.constant(TensorData::zeros(shape)));
        }

        let mut adj: Vec<Option<NodeId>> = vec![None; self.len()];
        let seed_shape = self.shape(output).to_vec();
        adj[output.0] = Some(self.constant(TensorData::full(seed_shape, T::one())));

        for i in (wrt.0..=output.0).rev() {
            if !active[i] {
                continue;
            }
            let Some(dy) = adj[i] else { continue };
            if i == wrt.0 {
                continue;
            }
            self.build_vjp(NodeId(i), dy, &active, &mut adj)?;
        }

        match adj[wrt.0] {
            Some(id) => Ok(id),
            None => {
                let shape = self.shape(wrt).to_vec();
                Ok(self.constant(TensorData::zeros(shape)))
            }
        }
    }

    /// Nodes that are descendants of `wrt` and ancestors of `output`.
    fn active_set(&self, output: NodeId, wrt: NodeId) -> Vec<bool> {
        let n = self.len();
        let mut desc = vec![false; n];
        desc[wrt.0] = true;
        for i in wrt.0 + 1..n {
            for inp in op_inputs(&self.node(NodeId(i)).op) {
                if desc[inp.0] {
                    desc[i] = true;
                    break;
                }
            }
        }
        let mut anc = vec![false; n];
        anc[output.0] = true;
        for i in (0..=output.0).rev() {
            if !anc[i] {
                continue;
            }
            for inp in op_inputs(&self.node(NodeId(i)).op) {
                anc[inp.0] = true;
            }
        }
        desc.iter().zip(anc).map(|(&d, a)| d && a).collect()
    }

    fn build_vjp(
        &mut self,
        at: NodeId,
        dy: NodeId,
        active: &[bool],
        adj: &mut [Option<NodeId>],
    ) -> Result<()> {
        // accumulate a contribution node into an input's adjoint slot
        macro_rules! give {
            ($to:expr, $contrib:expr) => {{
                let to: NodeId = $to;
                if active[to.0] {
                    let c: NodeId = $contrib;
                    adj[to.0] = Some(match adj[to.0] {
                        Some(prev) => self.add(prev, c),
                        None => c,
                    });
                }
            }};
        }
        let op = self.node(at).op.clone();
        match op {
            Op::Const | Op::Param(_) | Op::Input(_) => {}

            Op::Add(a, b) => {
                give!(a, dy);
                give!(b, dy);
            }
            Op::Sub(a, b) => {
                give!(a, dy);
                give!(b, self.neg(dy));
            }
            Op::Mul(a, b) => {
                give!(a, self.mul(dy, b));
                give!(b, self.mul(dy, a));
            }
            Op::Div(a, b) => {
                give!(a, self.div(dy, b));
                give!(b, {
                    let q = self.div(at, b); // (a/b)/b
                    let m = self.mul(dy, q);
                    self.neg(m)
                });
            }
            Op::AddScalar(a, _) => give!(a, dy),
            Op::MulScalar(a, c) => give!(a, self.mul_scalar(dy, c)),

            Op::Neg(a) => give!(a, self.neg(dy)),
            Op::Abs(a) => give!(a, {
                let s = self.sign_mask(a);
                self.mul(dy, s)
            }),
            Op::Exp(a) => give!(a, self.mul(dy, at)),
            Op::Sqrt(a) => give!(a, {
                let two = self.mul_scalar(at, T::c(2.0));
                let den = self.add_scalar(two, T::c(1e-12));
                self.div(dy, den)
            }),
            Op::Sin(a) => give!(a, {
                let c = self.cos(a);
                self.mul(dy, c)
            }),
            Op::Cos(a) => give!(a, {
                let s = self.sin(a);
                let m = self.mul(dy, s);
                self.neg(m)
            }),
            Op::Sigmoid(a) => give!(a, {
                let one_minus = {
                    let n = self.neg(at);
                    self.add_scalar(n, T::one())
                };
                let d = self.mul(at, one_minus);
                self.mul(dy, d)
            }),
            Op::Softplus(a) => give!(a, {
                let s = self.sigmoid(a);
                self.mul(dy, s)
            }),
            Op::Relu(a) => give!(a, {
                let m = self.step_mask(a, T::zero());
                self.mul(dy, m)
            }),
            Op::LeakyRelu(a, slope) => give!(a, {
                let m = self.step_mask(a, slope);
                self.mul(dy, m)
            }),
            Op::Swish(a) => give!(a, {
                // d/dx x*sigma(x) = sigma(x) * (1 + x * (1 - sigma(x)))
                let s = self.sigmoid(a);
                let ns = self.neg(s);
                let one_minus = self.add_scalar(ns, T::one());
                let t = self.mul(a, one_minus);
                let t1 = self.add_scalar(t, T::one());
                let d = self.mul(s, t1);
                self.mul(dy, d)
            }),
            Op::StepMask(..) | Op::SignMask(_) => {}

            Op::SumAll(a) => give!(a, {
                let shape = self.shape(a).to_vec();
                self.broadcast_to(dy, shape)
            }),
            Op::MeanAll(a) => give!(a, {
                let n = self.value(a).len();
                let g = self.mul_scalar(dy, T::one() / T::c(n as f64));
                let shape = self.shape(a).to_vec();
                self.broadcast_to(g, shape)
            }),
            Op::BroadcastTo(a, _) => give!(a, self.sum_all(dy)),
            Op::SumAxis0(a) => give!(a, {
                let (m, _) = self.mat_dims(a);
                self.expand_rows(dy, m)
            }),
            Op::SumAxis1(a) => give!(a, {
                let (_, n) = self.mat_dims(a);
                self.expand_cols(dy, n)
            }),
            Op::ExpandRows(a, _) => give!(a, self.sum_axis0(dy)),
            Op::ExpandCols(a, _) => give!(a, self.sum_axis1(dy)),
            Op::MinAxis1(a, ref arg) => give!(a, {
                let (m, n) = self.mat_dims(a);
                let mut hot = TensorData::zeros(vec![m, n]);
                for (i, &j) in arg.iter().enumerate() {
                    hot.data[i * n + j] = T::one();
                }
                let hot = self.constant(hot);
                let wide = self.expand_cols(dy, n);
                self.mul(wide, hot)
            }),

            Op::Reshape(a) => give!(a, {
                let shape = self.shape(a).to_vec();
                self.reshape(dy, shape)
            }),
            Op::Concat(axis, ref parts) => {
                let mut offset = 0usize;
                for &p in parts {
                    let pa = self.shape(p)[axis];
                    give!(p, self.slice(dy, axis, offset, pa));
                    offset += pa;
                }
            }
            Op::Slice {
                x, axis, start, ..
            } => give!(x, {
                let orig = self.shape(x)[axis];
                self.pad_slice(dy, axis, start, orig)
            }),
            Op::PadSlice {
                x, axis, start, ..
            } => give!(x, {
                let len = self.shape(x)[axis];
                self.slice(dy, axis, start, len)
            }),
            Op::Transpose2d(a) => give!(a, self.transpose2d(dy)),
            Op::MatMul(a, b) => {
                give!(a, {
                    let bt = self.transpose2d(b);
                    self.matmul(dy, bt)
                });
                give!(b, {
                    let atr = self.transpose2d(a);
                    self.matmul(atr, dy)
                });
            }

            Op::Conv2d { x, kernel, bias } => {
                if active[x.0] || active[kernel.0] || active[bias.0] {
                    return Err(Error::UnsupportedAdjoint("conv2d"));
                }
            }
            Op::BlurPool2d(a) => {
                if active[a.0] {
                    return Err(Error::UnsupportedAdjoint("blurpool2d"));
                }
            }
            Op::Resize2x(a) => {
                if active[a.0] {
                    return Err(Error::UnsupportedAdjoint("resize2x"));
                }
            }
            Op::GatherPix { map, .. } => {
                if active[map.0] {
                    return Err(Error::UnsupportedAdjoint("gather_pix"));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn op_inputs<T>(op: &Op<T>) -> Vec<NodeId> {
    match op {
        Op::Const | Op::Param(_) | Op::Input(_) => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => {
            vec![*a, *b]
        }
        Op::AddScalar(a, _)
        | Op::MulScalar(a, _)
        | Op::Neg(a)
        | Op::Abs(a)
        | Op::Exp(a)
        | Op::Sqrt(a)
        | Op::Sin(a)
        | Op::Cos(a)
        | Op::Sigmoid(a)
        | Op::Softplus(a)
        | Op::Relu(a)
        | Op::LeakyRelu(a, _)
        | Op::Swish(a)
        | Op::StepMask(a, _)
        | Op::SignMask(a)
        | Op::SumAll(a)
        | Op::MeanAll(a)
        | Op::BroadcastTo(a, _)
        | Op::SumAxis0(a)
        | Op::SumAxis1(a)
        | Op::ExpandRows(a, _)
        | Op::ExpandCols(a, _)
        | Op::MinAxis1(a, _)
        | Op::Reshape(a)
        | Op::Slice { x: a, .. }
        | Op::PadSlice { x: a, .. }
        | Op::Transpose2d(a)
        | Op::BlurPool2d(a)
        | Op::Resize2x(a)
        | Op::GatherPix { map: a, .. } => vec![*a],
        Op::Concat(_, parts) => parts.clone(),
        Op::Conv2d { x, kernel, bias } => vec![*x, *kernel, *bias],
    }
}
