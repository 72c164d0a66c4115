//! The implicit field: signed distance and albedo from pixel-aligned
//! features and encoded position, plus the gradient-based surface normal.

use super::NetConfig;
use crate::error::Result;
use crate::graph::{NodeId, ParamStore, ValueGraph};
use crate::scalar::Scalar;

/// Graph nodes of one field evaluation over a point batch.
#[derive(Debug, Clone, Copy)]
pub struct FieldNodes {
    /// Signed distance `[n]` (negative inside).
    pub d: NodeId,
    /// Albedo `[n,3]`, strictly inside (0,1).
    pub albedo: NodeId,
}

/// Evaluate the field MLP. `z` is `[n, feat_dim]`, `enc` is `[n, 3+6L]`.
/// Swish activations, skip re-injection of the input at the middle layer,
/// linear distance head and sigmoid color head.
pub fn field_eval_graph<T: Scalar>(
    g: &mut ValueGraph<T>,
    z: NodeId,
    enc: NodeId,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> Result<FieldNodes> {
    let input = g.concat(1, &[z, enc]);
    let mut h = input;
    for i in 0..cfg.field_layers {
        if i == cfg.field_skip_layer() {
            h = g.concat(1, &[h, input]);
        }
        let w = g.param(&format!("f.l{i}.w"), store)?;
        let b = g.param(&format!("f.l{i}.b"), store)?;
        let m = g.shape(h)[0];
        h = g.matmul(h, w);
        let bb = g.expand_rows(b, m);
        h = g.add(h, bb);
        h = g.swish(h);
    }
    let w = g.param("f.out.w", store)?;
    let b = g.param("f.out.b", store)?;
    let m = g.shape(h)[0];
    let out = g.matmul(h, w);
    let bb = g.expand_rows(b, m);
    let out = g.add(out, bb);

    let n = g.shape(out)[0];
    let d_col = g.slice(out, 1, 0, 1);
    let d = g.reshape(d_col, vec![n]);
    let a_raw = g.slice(out, 1, 1, 3);
    let albedo = g.sigmoid(a_raw);
    Ok(FieldNodes { d, albedo })
}

/// Surface normal node: gradient of the summed distance w.r.t. the point
/// node (rows are independent, so this is the per-point gradient). The
/// result is itself differentiable w.r.t. parameters.
pub fn surface_normal_node<T: Scalar>(
    g: &mut ValueGraph<T>,
    d: NodeId,
    points: NodeId,
) -> Result<NodeId> {
    let dsum = g.sum_all(d);
    g.input_grad(dsum, points)
}
