//! Plain compute kernels shared by graph operations and the forward-only
//! evaluators. Keeping a single implementation per primitive guarantees the
//! two paths produce bit-identical values.
//!
//! Parallel kernels split work by output row; each element has exactly one
//! writer and a fixed inner accumulation order, so results do not depend on
//! the thread count.

use crate::scalar::Scalar;
use rayon::prelude::*;

/// Rows below this bound are not worth a rayon dispatch.
const PAR_ROWS: usize = 64;

/// `out[m,n] = a[m,k] * b[k,n]`
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    let row = |i: usize, out_row: &mut [T]| {
        for kk in 0..k {
            let aik = a[i * k + kk];
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    };
    if m >= PAR_ROWS {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(i, r);
        }
    }
    out
}

/// `out[m,n] = a[k,m]^T * b[k,n]`
pub fn matmul_tn<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    let row = |i: usize, out_row: &mut [T]| {
        for kk in 0..k {
            let aik = a[kk * m + i];
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    };
    if m >= PAR_ROWS {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(i, r);
        }
    }
    out
}

/// `out[m,n] = a[m,k] * b[n,k]^T`
pub fn matmul_nt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    let row = |i: usize, out_row: &mut [T]| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *o = acc;
        }
    };
    if m >= PAR_ROWS {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(i, r);
        }
    }
    out
}

pub fn transpose2d<T: Scalar>(a: &[T], m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Stride-1 same-padding convolution. Input `[h,w,cin]`, kernel
/// `[kh,kw,cin,cout]`, bias `[cout]`, output `[h,w,cout]`.
pub fn conv2d<T: Scalar>(
    input: &[T],
    kernel: &[T],
    bias: &[T],
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
) -> Vec<T> {
    let ph = kh / 2;
    let pw = kw / 2;
    let mut out = vec![T::zero(); h * w * cout];
    let row = |y: usize, out_row: &mut [T]| {
        for x in 0..w {
            let opix = &mut out_row[x * cout..(x + 1) * cout];
            opix.copy_from_slice(bias);
            for ky in 0..kh {
                let iy = y as isize + ky as isize - ph as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = x as isize + kx as isize - pw as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let ipix = (iy as usize * w + ix as usize) * cin;
                    let kbase = (ky * kw + kx) * cin * cout;
                    for ci in 0..cin {
                        let v = input[ipix + ci];
                        let krow = &kernel[kbase + ci * cout..kbase + (ci + 1) * cout];
                        for (o, &kv) in opix.iter_mut().zip(krow) {
                            *o += v * kv;
                        }
                    }
                }
            }
        }
    };
    if h >= 16 {
        out.par_chunks_mut(w * cout)
            .enumerate()
            .for_each(|(y, r)| row(y, r));
    } else {
        for (y, r) in out.chunks_mut(w * cout).enumerate() {
            row(y, r);
        }
    }
    out
}

/// Gradient of [`conv2d`] w.r.t. its input.
pub fn conv2d_backward_input<T: Scalar>(
    dout: &[T],
    kernel: &[T],
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
) -> Vec<T> {
    let ph = kh / 2;
    let pw = kw / 2;
    let mut din = vec![T::zero(); h * w * cin];
    let row = |iy: usize, din_row: &mut [T]| {
        for ix in 0..w {
            let dpix = &mut din_row[ix * cin..(ix + 1) * cin];
            // output pixels whose receptive field covers (iy, ix)
            for ky in 0..kh {
                let y = iy as isize - ky as isize + ph as isize;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let x = ix as isize - kx as isize + pw as isize;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let obase = (y as usize * w + x as usize) * cout;
                    let kbase = (ky * kw + kx) * cin * cout;
                    for (ci, d) in dpix.iter_mut().enumerate() {
                        let krow = &kernel[kbase + ci * cout..kbase + (ci + 1) * cout];
                        let mut acc = T::zero();
                        for (&dv, &kv) in dout[obase..obase + cout].iter().zip(krow) {
                            acc += dv * kv;
                        }
                        *d += acc;
                    }
                }
            }
        }
    };
    if h >= 16 {
        din.par_chunks_mut(w * cin)
            .enumerate()
            .for_each(|(y, r)| row(y, r));
    } else {
        for (y, r) in din.chunks_mut(w * cin).enumerate() {
            row(y, r);
        }
    }
    din
}

/// Gradient of [`conv2d`] w.r.t. the kernel.
pub fn conv2d_backward_kernel<T: Scalar>(
    input: &[T],
    dout: &[T],
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
) -> Vec<T> {
    let ph = kh / 2;
    let pw = kw / 2;
    let mut dk = vec![T::zero(); kh * kw * cin * cout];
    // one writer per (ky, kx) tap
    dk.par_chunks_mut(cin * cout).enumerate().for_each(|(tap, dslice)| {
        let ky = tap / kw;
        let kx = tap % kw;
        for y in 0..h {
            let iy = y as isize + ky as isize - ph as isize;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            for x in 0..w {
                let ix = x as isize + kx as isize - pw as isize;
                if ix < 0 || ix >= w as isize {
                    continue;
                }
                let ipix = (iy as usize * w + ix as usize) * cin;
                let obase = (y * w + x) * cout;
                for ci in 0..cin {
                    let v = input[ipix + ci];
                    let drow = &mut dslice[ci * cout..(ci + 1) * cout];
                    for (d, &dv) in drow.iter_mut().zip(&dout[obase..obase + cout]) {
                        *d += v * dv;
                    }
                }
            }
        }
    });
    dk
}

pub fn conv2d_backward_bias<T: Scalar>(dout: &[T], pixels: usize, cout: usize) -> Vec<T> {
    let mut db = vec![T::zero(); cout];
    for p in 0..pixels {
        for (d, &dv) in db.iter_mut().zip(&dout[p * cout..(p + 1) * cout]) {
            *d += dv;
        }
    }
    db
}

/// 3x3 binomial filter weights (normalized).
const BLUR_W: [f64; 3] = [0.25, 0.5, 0.25];

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Anti-aliased downsampling: 3x3 binomial blur with edge-replicate padding
/// followed by stride-2 subsampling. `[h,w,c] -> [h/2,w/2,c]`.
pub fn blurpool2d<T: Scalar>(input: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let oh = h / 2;
    let ow = w / 2;
    let mut out = vec![T::zero(); oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let opix = &mut out[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for dy in 0..3usize {
                let iy = clamp_idx(2 * oy as isize + dy as isize - 1, h);
                for dx in 0..3usize {
                    let ix = clamp_idx(2 * ox as isize + dx as isize - 1, w);
                    let wgt = T::c(BLUR_W[dy] * BLUR_W[dx]);
                    let ipix = (iy * w + ix) * c;
                    for (o, &v) in opix.iter_mut().zip(&input[ipix..ipix + c]) {
                        *o += wgt * v;
                    }
                }
            }
        }
    }
    out
}

pub fn blurpool2d_backward<T: Scalar>(dout: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let oh = h / 2;
    let ow = w / 2;
    let mut din = vec![T::zero(); h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let opix = &dout[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for dy in 0..3usize {
                let iy = clamp_idx(2 * oy as isize + dy as isize - 1, h);
                for dx in 0..3usize {
                    let ix = clamp_idx(2 * ox as isize + dx as isize - 1, w);
                    let wgt = T::c(BLUR_W[dy] * BLUR_W[dx]);
                    let ipix = (iy * w + ix) * c;
                    for (d, &g) in din[ipix..ipix + c].iter_mut().zip(opix) {
                        *d += wgt * g;
                    }
                }
            }
        }
    }
    din
}

/// Bilinear 2x upsampling (half-pixel centers, edge clamped).
/// `[h,w,c] -> [2h,2w,c]`.
pub fn resize2x<T: Scalar>(input: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let oh = 2 * h;
    let ow = 2 * w;
    let mut out = vec![T::zero(); oh * ow * c];
    for oy in 0..oh {
        let (y0, y1, wy) = src_coords(oy, h);
        for ox in 0..ow {
            let (x0, x1, wx) = src_coords(ox, w);
            let opix = (oy * ow + ox) * c;
            let w00 = T::c((1.0 - wy) * (1.0 - wx));
            let w01 = T::c((1.0 - wy) * wx);
            let w10 = T::c(wy * (1.0 - wx));
            let w11 = T::c(wy * wx);
            let p00 = (y0 * w + x0) * c;
            let p01 = (y0 * w + x1) * c;
            let p10 = (y1 * w + x0) * c;
            let p11 = (y1 * w + x1) * c;
            for ch in 0..c {
                out[opix + ch] = w00 * input[p00 + ch]
                    + w01 * input[p01 + ch]
                    + w10 * input[p10 + ch]
                    + w11 * input[p11 + ch];
            }
        }
    }
    out
}

pub fn resize2x_backward<T: Scalar>(dout: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let oh = 2 * h;
    let ow = 2 * w;
    let mut din = vec![T::zero(); h * w * c];
    for oy in 0..oh {
        let (y0, y1, wy) = src_coords(oy, h);
        for ox in 0..ow {
            let (x0, x1, wx) = src_coords(ox, w);
            let opix = (oy * ow + ox) * c;
            let w00 = T::c((1.0 - wy) * (1.0 - wx));
            let w01 = T::c((1.0 - wy) * wx);
            let w10 = T::c(wy * (1.0 - wx));
            let w11 = T::c(wy * wx);
            let p00 = (y0 * w + x0) * c;
            let p01 = (y0 * w + x1) * c;
            let p10 = (y1 * w + x0) * c;
            let p11 = (y1 * w + x1) * c;
            for ch in 0..c {
                let g = dout[opix + ch];
                din[p00 + ch] += w00 * g;
                din[p01 + ch] += w01 * g;
                din[p10 + ch] += w10 * g;
                din[p11 + ch] += w11 * g;
            }
        }
    }
    din
}

/// Source row pair and interpolation weight for 2x upsampling of an output
/// index (half-pixel convention: src = (dst + 0.5)/2 - 0.5).
fn src_coords(o: usize, n: usize) -> (usize, usize, f64) {
    let src = (o as f64 + 0.5) / 2.0 - 0.5;
    let f = src.floor();
    let i0 = clamp_idx(f as isize, n);
    let i1 = clamp_idx(f as isize + 1, n);
    (i0, i1, src - f)
}
