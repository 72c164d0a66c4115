//! Feature extractor: U-Net with skip connections, blur-pool downsampling,
//! bilinear upsampling, and an illumination head on the bottleneck.

use super::NetConfig;
use crate::error::{Error, Result};
use crate::graph::layers::LEAKY_SLOPE;
use crate::graph::{NodeId, ParamStore, ValueGraph};
use crate::scalar::Scalar;

/// Build the feature extractor over an `[h,w,3]` image node. Returns the
/// pixel-aligned feature map `[h,w,feat_dim]` and the illumination code
/// `[illum_dim]`.
pub fn feature_extract_graph<T: Scalar>(
    g: &mut ValueGraph<T>,
    image: NodeId,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> Result<(NodeId, NodeId)> {
    let (h, w, c) = {
        let s = g.shape(image);
        if s.len() != 3 {
            return Err(Error::BadImageSize(format!("expected [h,w,3], got {s:?}")));
        }
        (s[0], s[1], s[2])
    };
    if c != 3 {
        return Err(Error::BadImageSize(format!("expected 3 channels, got {c}")));
    }
    if h != w {
        return Err(Error::BadImageSize(format!("expected square image, got {h}x{w}")));
    }
    let m = cfg.side_multiple();
    if h % m != 0 {
        return Err(Error::BadImageSize(format!(
            "side {h} not divisible by 2^depth = {m}"
        )));
    }

    let slope = T::c(LEAKY_SLOPE);
    let stages = cfg.unet_widths.len();
    let mut skips = Vec::with_capacity(stages);
    let mut x = image;
    for i in 0..stages {
        if i > 0 {
            x = g.blurpool2d(x);
        }
        let kw = g.param(&format!("g.enc{i}.w"), store)?;
        let kb = g.param(&format!("g.enc{i}.b"), store)?;
        x = g.conv2d(x, kw, kb);
        x = g.leaky_relu(x, slope);
        skips.push(x);
    }
    let bottleneck = x;

    // illumination head: global average pool -> dense projection
    let (bh, bw, bc) = g.img_dims(bottleneck);
    let flat = g.reshape(bottleneck, vec![bh * bw, bc]);
    let summed = g.sum_axis0(flat);
    let pooled = g.mul_scalar(summed, T::one() / T::c((bh * bw) as f64));
    let iw = g.param("g.illum.w", store)?;
    let ib = g.param("g.illum.b", store)?;
    let pooled_row = g.reshape(pooled, vec![1, bc]);
    let code = g.matmul(pooled_row, iw);
    let ib_row = g.expand_rows(ib, 1);
    let code = g.add(code, ib_row);
    let code = g.reshape(code, vec![cfg.illum_dim]);

    // decoder with skip concatenation
    let mut y = bottleneck;
    for i in (0..stages - 1).rev() {
        y = g.resize2x(y);
        y = g.concat(2, &[y, skips[i]]);
        let kw = g.param(&format!("g.dec{i}.w"), store)?;
        let kb = g.param(&format!("g.dec{i}.b"), store)?;
        y = g.conv2d(y, kw, kb);
        y = g.leaky_relu(y, slope);
    }
    let ow = g.param("g.out.w", store)?;
    let ob = g.param("g.out.b", store)?;
    let feat = g.conv2d(y, ow, ob);
    Ok((feat, code))
}
