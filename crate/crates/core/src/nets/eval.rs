//! Forward-only evaluation for inference (tracing, meshing, rendering).
//!
//! These paths reuse the graph's compute kernels and elementwise functions
//! so that a plain evaluation and a graph evaluation of the same network
//! produce bit-identical values; only the tape bookkeeping is skipped.

use super::field::{field_eval_graph, surface_normal_node, FieldNodes};
use super::NetConfig;
use crate::error::Result;
use crate::geom::bilinear::{bilinear_sample, bilinear_sample_plain};
use crate::geom::camera::Camera;
use crate::geom::encode::encode_batch;
use crate::geom::vec3::Vec3;
use crate::graph::kernels;
use crate::graph::layers::LEAKY_SLOPE;
use crate::graph::{NodeId, ParamStore, ValueGraph};
use crate::img::ImageBuf;
use crate::scalar::Scalar;
use crate::tensor::TensorData;

fn sigmoid<T: Scalar>(x: T) -> T {
    crate::graph::sigmoid_v(x)
}

fn dense_rows<T: Scalar>(x: &[T], n: usize, store: &ParamStore<T>, prefix: &str) -> Vec<T> {
    let w = store.get(&format!("{prefix}.w")).expect("weight");
    let b = store.get(&format!("{prefix}.b")).expect("bias");
    let (k, m) = (w.shape[0], w.shape[1]);
    let mut y = kernels::matmul(x, &w.data, n, k, m);
    for row in y.chunks_mut(m) {
        for (v, &bb) in row.iter_mut().zip(&b.data) {
            *v = *v + bb;
        }
    }
    y
}

fn swish_inplace<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        *v = *v * sigmoid(*v);
    }
}

fn leaky_inplace<T: Scalar>(x: &mut [T]) {
    let slope = T::c(LEAKY_SLOPE);
    for v in x.iter_mut() {
        if *v <= T::zero() {
            *v = *v * slope;
        }
    }
}

fn conv_layer<T: Scalar>(
    x: &[T],
    h: usize,
    w: usize,
    cin: usize,
    store: &ParamStore<T>,
    prefix: &str,
) -> (Vec<T>, usize) {
    let kw = store.get(&format!("{prefix}.w")).expect("kernel");
    let kb = store.get(&format!("{prefix}.b")).expect("bias");
    let (kh, kwd, cout) = (kw.shape[0], kw.shape[1], kw.shape[3]);
    (
        kernels::conv2d(x, &kw.data, &kb.data, h, w, cin, kh, kwd, cout),
        cout,
    )
}

fn concat_channels<T: Scalar>(a: &[T], ca: usize, b: &[T], cb: usize, pixels: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(pixels * (ca + cb));
    for p in 0..pixels {
        out.extend_from_slice(&a[p * ca..(p + 1) * ca]);
        out.extend_from_slice(&b[p * cb..(p + 1) * cb]);
    }
    out
}

/// Plain feature extraction; mirrors the graph builder op for op.
/// Returns the `[h,w,feat_dim]` map and the illumination code.
pub fn unet_plain<T: Scalar>(
    image: &ImageBuf<T>,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> (Vec<T>, Vec<T>) {
    let stages = cfg.unet_widths.len();
    let (mut h, mut w) = (image.h, image.w);
    let mut x = image.data.clone();
    let mut cin = image.c;
    let mut skips: Vec<(Vec<T>, usize, usize, usize)> = Vec::with_capacity(stages);
    for i in 0..stages {
        if i > 0 {
            x = kernels::blurpool2d(&x, h, w, cin);
            h /= 2;
            w /= 2;
        }
        let (y, cout) = conv_layer(&x, h, w, cin, store, &format!("g.enc{i}"));
        x = y;
        cin = cout;
        leaky_inplace(&mut x);
        skips.push((x.clone(), h, w, cin));
    }

    // illumination head
    let (bh, bw, bc) = (h, w, cin);
    let mut pooled = vec![T::zero(); bc];
    for p in 0..bh * bw {
        for (s, &v) in pooled.iter_mut().zip(&x[p * bc..(p + 1) * bc]) {
            *s += v;
        }
    }
    let inv = T::one() / T::c((bh * bw) as f64);
    for v in pooled.iter_mut() {
        *v = *v * inv;
    }
    let code = dense_rows(&pooled, 1, store, "g.illum");

    // decoder
    for i in (0..stages - 1).rev() {
        x = kernels::resize2x(&x, h, w, cin);
        h *= 2;
        w *= 2;
        let (skip, sh, sw, sc) = &skips[i];
        debug_assert!(*sh == h && *sw == w);
        x = concat_channels(&x, cin, skip, *sc, h * w);
        cin += sc;
        let (y, cout) = conv_layer(&x, h, w, cin, store, &format!("g.dec{i}"));
        x = y;
        cin = cout;
        leaky_inplace(&mut x);
    }
    let (feat, _) = conv_layer(&x, h, w, cin, store, "g.out");
    (feat, code)
}

/// Plain field MLP over pre-gathered features and encodings.
pub fn field_plain<T: Scalar>(
    z: &[T],
    enc: &[T],
    n: usize,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> (Vec<T>, Vec<T>) {
    let fd = cfg.feat_dim;
    let ed = cfg.encoded_dim();
    let input = concat_channels(z, fd, enc, ed, n);
    let in_dim = fd + ed;
    let mut h = input.clone();
    for i in 0..cfg.field_layers {
        if i == cfg.field_skip_layer() {
            let hc = if i == 0 { in_dim } else { cfg.field_width };
            h = concat_channels(&h, hc, &input, in_dim, n);
        }
        h = dense_rows(&h, n, store, &format!("f.l{i}"));
        swish_inplace(&mut h);
    }
    let out = dense_rows(&h, n, store, "f.out");
    let mut d = Vec::with_capacity(n);
    let mut albedo = Vec::with_capacity(3 * n);
    for row in out.chunks(4) {
        d.push(row[0]);
        albedo.extend(row[1..4].iter().map(|&v| sigmoid(v)));
    }
    (d, albedo)
}

/// Plain shading MLP.
pub fn shading_plain<T: Scalar>(
    normals: &[T],
    illum: &[T],
    n: usize,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> Vec<T> {
    let id = illum.len();
    let mut l_rows = Vec::with_capacity(n * id);
    for _ in 0..n {
        l_rows.extend_from_slice(illum);
    }
    let mut h = concat_channels(normals, 3, &l_rows, id, n);
    for i in 0..cfg.shade_layers {
        h = dense_rows(&h, n, store, &format!("s.l{i}"));
        swish_inplace(&mut h);
    }
    let mut out = dense_rows(&h, n, store, "s.out");
    for v in out.iter_mut() {
        *v = v.max(T::zero());
    }
    out
}

const Z_CLAMP: f64 = 1e-6;

/// Projection used for feature lookup, shared by the plain and graph
/// paths: u = f*(x/z) + cx with z clamped away from zero.
pub fn project_for_lookup<T: Scalar>(cam: &Camera<T>, p: Vec3<T>) -> [T; 2] {
    let xc = cam.to_camera(p);
    let z = xc[2].max(T::c(Z_CLAMP));
    [
        cam.focal_px * (xc[0] / z) + cam.center[0],
        cam.focal_px * (xc[1] / z) + cam.center[1],
    ]
}

/// Graph projection of an `[n,3]` point node to `[n,2]` pixel coordinates,
/// differentiable in the points.
pub fn project_node<T: Scalar>(g: &mut ValueGraph<T>, cam: &Camera<T>, x: NodeId) -> NodeId {
    let n = g.shape(x)[0];
    let mut o_rows = Vec::with_capacity(3 * n);
    for _ in 0..n {
        o_rows.extend_from_slice(&cam.position);
    }
    let o = g.constant(TensorData::matrix(n, 3, o_rows));
    let centered = g.sub(x, o);
    // (x-o) * R^T gives camera coordinates per row
    let r = &cam.orientation;
    let rt = g.constant(TensorData::matrix(
        3,
        3,
        vec![
            r[0][0], r[1][0], r[2][0], r[0][1], r[1][1], r[2][1], r[0][2], r[1][2], r[2][2],
        ],
    ));
    let xc = g.matmul(centered, rt);
    let xy = g.slice(xc, 1, 0, 2);
    let z = g.slice(xc, 1, 2, 1);
    // clamp z only when some point needs it, keeping the common path
    // bit-identical to the plain evaluator
    let zmin = g
        .value(z)
        .iter()
        .fold(T::infinity(), |acc, &v| acc.min(v));
    let z = if zmin <= T::c(Z_CLAMP) {
        let shifted = g.add_scalar(z, -T::c(Z_CLAMP));
        let pos = g.relu(shifted);
        g.add_scalar(pos, T::c(Z_CLAMP))
    } else {
        z
    };
    let zz = g.concat(1, &[z, z]);
    let ratio = g.div(xy, zz);
    let scaled = g.mul_scalar(ratio, cam.focal_px);
    let ucol = g.slice(scaled, 1, 0, 1);
    let vcol = g.slice(scaled, 1, 1, 1);
    let u = g.add_scalar(ucol, cam.center[0]);
    let v = g.add_scalar(vcol, cam.center[1]);
    g.concat(1, &[u, v])
}

/// Pixel-aligned field evaluation as graph nodes: project, bilinear
/// feature lookup, positional encoding, field MLP. `x` is an `[n,3]` node.
pub fn pixel_aligned_field_graph<T: Scalar>(
    g: &mut ValueGraph<T>,
    featmap: NodeId,
    cam: &Camera<T>,
    x: NodeId,
    cfg: &NetConfig,
    store: &ParamStore<T>,
) -> Result<FieldNodes> {
    let uv = project_node(g, cam, x);
    let z = bilinear_sample(g, featmap, uv);
    let enc = crate::geom::encode::encode_node(g, x, cfg.encode_octaves);
    field_eval_graph(g, z, enc, cfg, store)
}

/// A trained model bound to one input image: features extracted once, then
/// queried per point. This is the inference-time field.
pub struct NeuralField<'a, T> {
    pub store: &'a ParamStore<T>,
    pub cfg: &'a NetConfig,
    pub camera: Camera<T>,
    pub featmap: Vec<T>,
    pub feat_h: usize,
    pub feat_w: usize,
    pub illum: Vec<T>,
}

impl<'a, T: Scalar> NeuralField<'a, T> {
    pub fn from_image(
        image: &ImageBuf<T>,
        camera: Camera<T>,
        cfg: &'a NetConfig,
        store: &'a ParamStore<T>,
    ) -> Result<Self> {
        if image.h != image.w || image.h % cfg.side_multiple() != 0 {
            return Err(crate::error::Error::BadImageSize(format!(
                "{}x{} (need square, side divisible by {})",
                image.w,
                image.h,
                cfg.side_multiple()
            )));
        }
        let (featmap, illum) = unet_plain(image, cfg, store);
        Ok(Self {
            store,
            cfg,
            camera,
            featmap,
            feat_h: image.h,
            feat_w: image.w,
            illum,
        })
    }

    /// Use an externally supplied illumination code (illumination transfer).
    pub fn with_illum(mut self, illum: Vec<T>) -> Self {
        self.illum = illum;
        self
    }

    fn gather_features(&self, pts: &[Vec3<T>]) -> Vec<T> {
        let mut z = Vec::with_capacity(pts.len() * self.cfg.feat_dim);
        for &p in pts {
            let uv = project_for_lookup(&self.camera, p);
            z.extend(bilinear_sample_plain(
                &self.featmap,
                self.feat_h,
                self.feat_w,
                self.cfg.feat_dim,
                uv,
            ));
        }
        z
    }

    /// Signed distance and albedo for a point batch.
    pub fn eval_batch(&self, pts: &[Vec3<T>]) -> (Vec<T>, Vec<T>) {
        if pts.is_empty() {
            return (vec![], vec![]);
        }
        let z = self.gather_features(pts);
        let flat: Vec<T> = pts.iter().flatten().copied().collect();
        let enc = encode_batch(&flat, self.cfg.encode_octaves);
        field_plain(&z, &enc, pts.len(), self.cfg, self.store)
    }

    pub fn distance_batch(&self, pts: &[Vec3<T>]) -> Vec<T> {
        self.eval_batch(pts).0
    }

    /// Exact field normals via the graph engine (not normalized).
    pub fn normal_batch(&self, pts: &[Vec3<T>]) -> Vec<Vec3<T>> {
        if pts.is_empty() {
            return vec![];
        }
        let mut g = ValueGraph::new();
        let fm = g.constant(TensorData::new(
            vec![self.feat_h, self.feat_w, self.cfg.feat_dim],
            self.featmap.clone(),
        ));
        let flat: Vec<T> = pts.iter().flatten().copied().collect();
        let x = g.input("x", TensorData::matrix(pts.len(), 3, flat));
        let f = pixel_aligned_field_graph(&mut g, fm, &self.camera, x, self.cfg, self.store)
            .expect("consistent shapes");
        let n = surface_normal_node(&mut g, f.d, x).expect("x is in graph");
        g.value(n)
            .chunks(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect()
    }

    /// Shading values for (normal, code) pairs using the bound image's
    /// illumination code.
    pub fn shade_batch(&self, normals: &[Vec3<T>]) -> Vec<T> {
        let flat: Vec<T> = normals.iter().flatten().copied().collect();
        shading_plain(&flat, &self.illum, normals.len(), self.cfg, self.store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::ModelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> NetConfig {
        NetConfig {
            unet_widths: vec![4, 8],
            feat_dim: 4,
            illum_dim: 4,
            field_width: 16,
            field_layers: 4,
            shade_width: 8,
            shade_layers: 2,
            encode_octaves: 2,
        }
    }

    fn test_camera() -> Camera<f32> {
        Camera::look_at(
            [0.0, 0.0, -2.5],
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            20.0,
            (16, 16),
        )
    }

    /// The plain path and the graph path must agree bit for bit.
    #[test]
    fn plain_and_graph_paths_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = tiny_cfg();
        let m = ModelParams::<f32>::init(cfg.clone(), 0.1, &mut rng);
        let cam = test_camera();
        let mut img = ImageBuf::<f32>::new(16, 16, 3);
        for v in img.data.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let field = NeuralField::from_image(&img, cam, &cfg, &m.store).unwrap();

        let pts: Vec<[f32; 3]> = (0..10)
            .map(|_| {
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ]
            })
            .collect();
        let (d_plain, a_plain) = field.eval_batch(&pts);

        // graph path over the same featmap
        let mut g = ValueGraph::new();
        let fm = g.constant(TensorData::new(vec![16, 16, 4], field.featmap.clone()));
        let flat: Vec<f32> = pts.iter().flatten().copied().collect();
        let x = g.input("x", TensorData::matrix(10, 3, flat));
        let f = pixel_aligned_field_graph(&mut g, fm, &cam, x, &cfg, &m.store).unwrap();
        assert_eq!(g.value(f.d), &d_plain[..]);
        assert_eq!(g.value(f.albedo), &a_plain[..]);
    }

    /// Full graph feature extraction equals the plain evaluator.
    #[test]
    fn unet_plain_matches_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = tiny_cfg();
        let m = ModelParams::<f32>::init(cfg.clone(), 0.1, &mut rng);
        let mut img = ImageBuf::<f32>::new(16, 16, 3);
        for v in img.data.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let (feat_plain, code_plain) = unet_plain(&img, &cfg, &m.store);

        let mut g = ValueGraph::new();
        let imgn = g.constant(TensorData::new(vec![16, 16, 3], img.data.clone()));
        let (feat, code) = feature_extract_graph(&mut g, imgn, &cfg, &m.store).unwrap();
        assert_eq!(g.value(feat), &feat_plain[..]);
        assert_eq!(g.value(code), &code_plain[..]);
    }

    #[test]
    fn shading_plain_matches_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = tiny_cfg();
        let m = ModelParams::<f32>::init(cfg.clone(), 0.1, &mut rng);
        let normals: Vec<[f32; 3]> = (0..5)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let code: Vec<f32> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let flat: Vec<f32> = normals.iter().flatten().copied().collect();
        let plain = shading_plain(&flat, &code, 5, &cfg, &m.store);

        let mut g = ValueGraph::new();
        let nn = g.constant(TensorData::matrix(5, 3, flat));
        let ln = g.constant(TensorData::vector(code));
        let s = crate::nets::shading::shading_graph(&mut g, nn, ln, &cfg, &m.store).unwrap();
        assert_eq!(g.value(s), &plain[..]);
    }
}
