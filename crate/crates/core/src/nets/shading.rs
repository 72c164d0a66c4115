//! Per-point shading from surface normal and illumination code; shaded
//! color is the elementwise product with albedo.

use super::NetConfig;
use crate::error::Result;
use crate::graph::{NodeId, ParamStore, ValueGraph};
use crate::scalar::Scalar;

/// Shading network over `[n,3]` normals and one `[illum_dim]` code.
/// Swish hidden layers, ReLU output (shading is nonnegative).
pub fn shading_graph<T: Scalar>(
    g: &mut ValueGraph<T>,
    normals: NodeId,
    illum: NodeId,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> Result<NodeId> {
    let n = g.shape(normals)[0];
    let l_rows = g.expand_rows(illum, n);
    let mut h = g.concat(1, &[normals, l_rows]);
    for i in 0..cfg.shade_layers {
        let w = g.param(&format!("s.l{i}.w"), store)?;
        let b = g.param(&format!("s.l{i}.b"), store)?;
        h = g.matmul(h, w);
        let bb = g.expand_rows(b, n);
        h = g.add(h, bb);
        h = g.swish(h);
    }
    let w = g.param("s.out.w", store)?;
    let b = g.param("s.out.b", store)?;
    let out = g.matmul(h, w);
    let bb = g.expand_rows(b, n);
    let out = g.add(out, bb);
    Ok(g.relu(out))
}

/// c = s o a, elementwise.
pub fn shaded_color<T: Scalar>(g: &mut ValueGraph<T>, albedo: NodeId, shading: NodeId) -> NodeId {
    g.mul(shading, albedo)
}
