//! Layer catalog the networks are assembled from.

use super::{NodeId, ParamStore, ValueGraph};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorData;
use rand::Rng;

/// Slope of the leaky ReLU used throughout the encoder.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Swish,
    Sigmoid,
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    /// Fully connected: `[in] -> [width]` or batched `[m,in] -> [m,width]`.
    Dense { width: usize },
    /// Stride-1 same-padding convolution, square kernel.
    Conv2d { filters: usize, ksize: usize },
    /// Anti-aliased 2x downsampling.
    BlurPool2d,
    /// Bilinear 2x upsampling.
    Resize2x,
    Activation(Activation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn dense(width: usize) -> Self {
        Self {
            kind: LayerKind::Dense { width },
        }
    }
    pub fn conv2d(filters: usize, ksize: usize) -> Self {
        Self {
            kind: LayerKind::Conv2d { filters, ksize },
        }
    }
    pub fn blurpool2d() -> Self {
        Self {
            kind: LayerKind::BlurPool2d,
        }
    }
    pub fn resize2x() -> Self {
        Self {
            kind: LayerKind::Resize2x,
        }
    }
    pub fn activation(a: Activation) -> Self {
        Self {
            kind: LayerKind::Activation(a),
        }
    }
}

pub fn apply_activation<T: Scalar>(g: &mut ValueGraph<T>, a: Activation, x: NodeId) -> NodeId {
    match a {
        Activation::LeakyRelu => g.leaky_relu(x, T::c(LEAKY_SLOPE)),
        Activation::Swish => g.swish(x),
        Activation::Sigmoid => g.sigmoid(x),
        Activation::Relu => g.relu(x),
        Activation::Identity => x,
    }
}

/// Apply one layer; parameters are looked up as `{prefix}.w` / `{prefix}.b`.
pub fn apply_layer<T: Scalar>(
    g: &mut ValueGraph<T>,
    spec: &LayerSpec,
    input: NodeId,
    prefix: &str,
    store: &ParamStore<T>,
) -> Result<NodeId> {
    match &spec.kind {
        LayerKind::Dense { width } => {
            let rank1 = g.shape(input).len() == 1;
            let x = if rank1 {
                let n = g.shape(input)[0];
                g.reshape(input, vec![1, n])
            } else if g.shape(input).len() == 2 {
                input
            } else {
                return Err(Error::ShapeMismatch {
                    expected: vec![0, 0],
                    actual: g.shape(input).to_vec(),
                });
            };
            let (m, n_in) = g.mat_dims(x);
            let w = g.param(&format!("{prefix}.w"), store)?;
            let b = g.param(&format!("{prefix}.b"), store)?;
            if g.shape(w) != [n_in, *width] {
                return Err(Error::ShapeMismatch {
                    expected: vec![n_in, *width],
                    actual: g.shape(w).to_vec(),
                });
            }
            let y = g.matmul(x, w);
            let bb = g.expand_rows(b, m);
            let y = g.add(y, bb);
            Ok(if rank1 {
                g.reshape(y, vec![*width])
            } else {
                y
            })
        }
        LayerKind::Conv2d { filters, ksize } => {
            if g.shape(input).len() != 3 {
                return Err(Error::ShapeMismatch {
                    expected: vec![0, 0, 0],
                    actual: g.shape(input).to_vec(),
                });
            }
            let (_, _, cin) = g.img_dims(input);
            let w = g.param(&format!("{prefix}.w"), store)?;
            let b = g.param(&format!("{prefix}.b"), store)?;
            if g.shape(w) != [*ksize, *ksize, cin, *filters] {
                return Err(Error::ShapeMismatch {
                    expected: vec![*ksize, *ksize, cin, *filters],
                    actual: g.shape(w).to_vec(),
                });
            }
            Ok(g.conv2d(input, w, b))
        }
        LayerKind::BlurPool2d => {
            if g.shape(input).len() != 3 {
                return Err(Error::ShapeMismatch {
                    expected: vec![0, 0, 0],
                    actual: g.shape(input).to_vec(),
                });
            }
            Ok(g.blurpool2d(input))
        }
        LayerKind::Resize2x => {
            if g.shape(input).len() != 3 {
                return Err(Error::ShapeMismatch {
                    expected: vec![0, 0, 0],
                    actual: g.shape(input).to_vec(),
                });
            }
            Ok(g.resize2x(input))
        }
        LayerKind::Activation(a) => Ok(apply_activation(g, *a, input)),
    }
}

/// Glorot-uniform initialization for a dense layer.
pub fn init_dense<T: Scalar, R: Rng>(
    store: &mut ParamStore<T>,
    prefix: &str,
    n_in: usize,
    n_out: usize,
    rng: &mut R,
) {
    let bound = (6.0 / (n_in + n_out) as f64).sqrt();
    let w: Vec<T> = (0..n_in * n_out)
        .map(|_| T::c(rng.gen_range(-bound..bound)))
        .collect();
    store.insert(&format!("{prefix}.w"), TensorData::new(vec![n_in, n_out], w));
    store.insert(&format!("{prefix}.b"), TensorData::zeros(vec![n_out]));
}

/// Glorot-uniform initialization for a conv layer.
pub fn init_conv<T: Scalar, R: Rng>(
    store: &mut ParamStore<T>,
    prefix: &str,
    ksize: usize,
    cin: usize,
    cout: usize,
    rng: &mut R,
) {
    let fan_in = ksize * ksize * cin;
    let fan_out = ksize * ksize * cout;
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w: Vec<T> = (0..ksize * ksize * cin * cout)
        .map(|_| T::c(rng.gen_range(-bound..bound)))
        .collect();
    store.insert(
        &format!("{prefix}.w"),
        TensorData::new(vec![ksize, ksize, cin, cout], w),
    );
    store.insert(&format!("{prefix}.b"), TensorData::zeros(vec![cout]));
}
