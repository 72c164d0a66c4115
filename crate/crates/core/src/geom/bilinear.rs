//! Bilinear map lookup, differentiable in both map values and lookup
//! coordinates.

use crate::graph::{NodeId, ValueGraph};
use crate::scalar::Scalar;
use crate::tensor::TensorData;

/// Plain bilinear sample of `map [h,w,c]` at continuous pixel (u, v)
/// (u along columns). Out-of-bounds coordinates clamp to the border.
pub fn bilinear_sample_plain<T: Scalar>(
    map: &[T],
    h: usize,
    w: usize,
    c: usize,
    uv: [T; 2],
) -> Vec<T> {
    let (x0, x1, fx) = corner(uv[0], w);
    let (y0, y1, fy) = corner(uv[1], h);
    let w00 = (T::one() - fy) * (T::one() - fx);
    let w01 = (T::one() - fy) * fx;
    let w10 = fy * (T::one() - fx);
    let w11 = fy * fx;
    let p00 = (y0 * w + x0) * c;
    let p01 = (y0 * w + x1) * c;
    let p10 = (y1 * w + x0) * c;
    let p11 = (y1 * w + x1) * c;
    // grouped exactly like the graph builder so both paths round identically
    (0..c)
        .map(|ch| {
            (map[p00 + ch] * w00 + map[p01 + ch] * w01)
                + (map[p10 + ch] * w10 + map[p11 + ch] * w11)
        })
        .collect()
}

fn corner<T: Scalar>(v: T, n: usize) -> (usize, usize, T) {
    let max = T::c(n as f64 - 1.0);
    let v = v.max(T::zero()).min(max);
    let f = v.floor();
    let i0 = f.to_f64_lossy() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0.min(n - 1), i1, v - f)
}

/// Graph bilinear sample: `map` is a `[h,w,c]` node, `uv` a `[n,2]` node of
/// continuous pixel coordinates. Returns `[n,c]`, differentiable w.r.t.
/// both the map contents and `uv` (through the interpolation weights; the
/// integer corner choice is frozen at the current `uv` values, matching
/// eager-framework semantics). Out-of-bounds lookups clamp and bump the
/// graph's `oob_clamps` counter.
pub fn bilinear_sample<T: Scalar>(g: &mut ValueGraph<T>, map: NodeId, uv: NodeId) -> NodeId {
    let (h, w, c) = {
        let s = g.shape(map);
        (s[0], s[1], s[2])
    };
    let (n, two) = {
        let s = g.shape(uv);
        (s[0], s[1])
    };
    assert_eq!(two, 2, "uv node must be [n,2]");

    // freeze corner indices and clamp bounds from current uv values
    let uvv = g.value(uv).to_vec();
    let mut idx00 = Vec::with_capacity(n);
    let mut idx01 = Vec::with_capacity(n);
    let mut idx10 = Vec::with_capacity(n);
    let mut idx11 = Vec::with_capacity(n);
    let mut base = Vec::with_capacity(2 * n); // integer corner (x0, y0) as scalars
    let maxu = T::c(w as f64 - 1.0);
    let maxv = T::c(h as f64 - 1.0);
    for i in 0..n {
        let u = uvv[2 * i];
        let v = uvv[2 * i + 1];
        if u < T::zero() || u > maxu || v < T::zero() || v > maxv {
            g.oob_clamps += 1;
        }
        let (x0, x1, _) = corner(u, w);
        let (y0, y1, _) = corner(v, h);
        idx00.push((y0, x0));
        idx01.push((y0, x1));
        idx10.push((y1, x0));
        idx11.push((y1, x1));
        base.push(T::c(x0 as f64));
        base.push(T::c(y0 as f64));
    }

    // frac = clamp(uv) - floor corners; clamping freezes the gradient at
    // the border just like the frozen corner choice
    let base = g.constant(TensorData::matrix(n, 2, base));
    let frac = g.sub(uv, base);
    // weights from frac: u-frac column and v-frac column
    let fu = g.slice(frac, 1, 0, 1); // [n,1]
    let fv = g.slice(frac, 1, 1, 1);
    let fu = clamp01(g, fu);
    let fv = clamp01(g, fv);
    let one_minus_fu = {
        let nfu = g.neg(fu);
        g.add_scalar(nfu, T::one())
    };
    let one_minus_fv = {
        let nfv = g.neg(fv);
        g.add_scalar(nfv, T::one())
    };

    let g00 = g.gather_pix(map, idx00);
    let g01 = g.gather_pix(map, idx01);
    let g10 = g.gather_pix(map, idx10);
    let g11 = g.gather_pix(map, idx11);

    let w00 = weight(g, one_minus_fv, one_minus_fu, c);
    let w01 = weight(g, one_minus_fv, fu, c);
    let w10 = weight(g, fv, one_minus_fu, c);
    let w11 = weight(g, fv, fu, c);

    let t00 = g.mul(g00, w00);
    let t01 = g.mul(g01, w01);
    let t10 = g.mul(g10, w10);
    let t11 = g.mul(g11, w11);
    let s0 = g.add(t00, t01);
    let s1 = g.add(t10, t11);
    g.add(s0, s1)
}

/// relu(x) - relu(x - 1): identity on [0,1], flat outside.
fn clamp01<T: Scalar>(g: &mut ValueGraph<T>, x: NodeId) -> NodeId {
    let lo = g.relu(x);
    let over = g.add_scalar(lo, -T::one());
    let over = g.relu(over);
    g.sub(lo, over)
}

fn weight<T: Scalar>(g: &mut ValueGraph<T>, a: NodeId, b: NodeId, c: usize) -> NodeId {
    let m = g.mul(a, b); // [n,1]
    let n = g.shape(m)[0];
    let flat = g.reshape(m, vec![n]);
    g.expand_cols(flat, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_map() -> TensorData<f64> {
        // 2x2 single channel: rows [0,0] / [1,1]
        TensorData::new(vec![2, 2, 1], vec![0.0, 0.0, 1.0, 1.0])
    }

    #[test]
    fn integer_uv_returns_exact_grid_value() {
        let map = TensorData::new(vec![2, 3, 2], (0..12).map(|i| i as f64).collect());
        for y in 0..2usize {
            for x in 0..3usize {
                let v = bilinear_sample_plain(&map.data, 2, 3, 2, [x as f64, y as f64]);
                let base = (y * 3 + x) * 2;
                assert_eq!(v, vec![map.data[base], map.data[base + 1]]);
            }
        }
    }

    #[test]
    fn cell_center_is_mean_of_corners() {
        let m = test_map();
        let v = bilinear_sample_plain(&m.data, 2, 2, 1, [0.5, 0.5]);
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn graph_matches_plain_and_uv_gradient_matches_fd() {
        let m = TensorData::new(
            vec![3, 3, 2],
            (0..18).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect(),
        );
        let probe = [[0.3, 1.7], [1.2, 0.4], [0.0, 2.0]];
        let uv_flat: Vec<f64> = probe.iter().flatten().copied().collect();

        let mut g = ValueGraph::new();
        let map = g.constant(m.clone());
        let uv = g.input("uv", TensorData::matrix(3, 2, uv_flat.clone()));
        let out = bilinear_sample(&mut g, map, uv);
        for (i, p) in probe.iter().enumerate() {
            let plain = bilinear_sample_plain(&m.data, 3, 3, 2, *p);
            for ch in 0..2 {
                assert!((g.value(out)[i * 2 + ch] - plain[ch]).abs() < 1e-12);
            }
        }

        // gradient w.r.t. uv against central differences
        let sum = g.sum_all(out);
        let grad = g.grad_of(sum, uv).unwrap();
        let h = 1e-6;
        for i in 0..uv_flat.len() {
            // skip probes sitting exactly on grid lines where bilinear is
            // only one-sided differentiable
            let frac = uv_flat[i].fract();
            if frac == 0.0 {
                continue;
            }
            let eval = |uvp: &[f64]| -> f64 {
                (0..3)
                    .map(|r| {
                        bilinear_sample_plain(&m.data, 3, 3, 2, [uvp[2 * r], uvp[2 * r + 1]])
                            .iter()
                            .sum::<f64>()
                    })
                    .sum()
            };
            let mut up = uv_flat.clone();
            up[i] += h;
            let mut dn = uv_flat.clone();
            dn[i] -= h;
            let fd = (eval(&up) - eval(&dn)) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel <= 1e-4, "uv[{i}]: analytic {} vs fd {fd}", grad[i]);
        }
    }

    #[test]
    fn out_of_bounds_clamps_and_flags() {
        let m = test_map();
        let mut g = ValueGraph::new();
        let map = g.constant(m.clone());
        let uv = g.constant(TensorData::matrix(1, 2, vec![-3.0, 5.0]));
        let out = bilinear_sample(&mut g, map, uv);
        // clamps to (0, 1): bottom-left corner value 1.0
        assert!((g.value(out)[0] - 1.0).abs() < 1e-12);
        assert_eq!(g.oob_clamps, 1);
    }
}
