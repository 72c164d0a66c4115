//! Sinusoidal positional encoding of 3D points.
//!
//! gamma(x) = [x, sin(2^0 x), cos(2^0 x), ..., sin(2^(L-1) x), cos(2^(L-1) x)]
//! per axis, giving 3 + 6L output channels.

use crate::graph::{NodeId, ValueGraph};
use crate::scalar::Scalar;

/// Default number of frequency octaves.
pub const DEFAULT_OCTAVES: usize = 6;

pub fn encoded_dim(octaves: usize) -> usize {
    3 + 6 * octaves
}

/// A point together with its encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPoint<T> {
    pub raw: [T; 3],
    pub encoding: Vec<T>,
}

/// Encode a single point.
pub fn positional_encode<T: Scalar>(x: [T; 3], octaves: usize) -> EncodedPoint<T> {
    let mut enc = Vec::with_capacity(encoded_dim(octaves));
    enc.extend_from_slice(&x);
    let mut freq = T::one();
    for _ in 0..octaves {
        for k in 0..3 {
            enc.push((x[k] * freq).sin());
        }
        for k in 0..3 {
            enc.push((x[k] * freq).cos());
        }
        freq = freq + freq;
    }
    EncodedPoint {
        raw: x,
        encoding: enc,
    }
}

/// Encode a batch of points stored row-major `[n,3]`.
pub fn encode_batch<T: Scalar>(pts: &[T], octaves: usize) -> Vec<T> {
    let n = pts.len() / 3;
    let dim = encoded_dim(octaves);
    let mut out = Vec::with_capacity(n * dim);
    for i in 0..n {
        let p = [pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]];
        out.extend(positional_encode(p, octaves).encoding);
    }
    out
}

/// Graph version: `[n,3]` node -> `[n, 3+6L]` node, differentiable in x.
pub fn encode_node<T: Scalar>(g: &mut ValueGraph<T>, x: NodeId, octaves: usize) -> NodeId {
    let mut parts = vec![x];
    let mut freq = T::one();
    for _ in 0..octaves {
        let xs = g.mul_scalar(x, freq);
        let s = g.sin(xs);
        let c = g.cos(xs);
        parts.push(s);
        parts.push(c);
        freq = freq + freq;
    }
    g.concat(1, &parts)
}
