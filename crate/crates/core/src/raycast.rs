//! Surface location along rays: the sigmoid min-distance indicator, sphere
//! tracing from the camera and from the far side, the detached
//! differentiable intersection, and patch / full-image rendering.

use crate::error::{Error, Result};
use crate::field::{DistanceField, SurfaceField};
use crate::geom::camera::{Camera, Ray};
use crate::geom::vec3::{self, Aabb, Vec3};
use crate::graph::{sigmoid_v, NodeId, ValueGraph};
use crate::img::ImageBuf;
use crate::scalar::Scalar;
use crate::tensor::TensorData;

#[derive(Debug, Clone, Copy)]
pub struct TraceConfig<T> {
    pub eps_hit: T,
    pub max_iters: usize,
    pub eps_grazing: T,
    pub sigma_steps: usize,
}

impl<T: Scalar> Default for TraceConfig<T> {
    fn default() -> Self {
        Self {
            eps_hit: T::c(5e-4),
            max_iters: 64,
            eps_grazing: T::c(1e-2),
            sigma_steps: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSide {
    /// From the camera into the scene: first crossing.
    Front,
    /// From the far scene bound back toward the camera: last crossing.
    Back,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceHit<T> {
    pub t: T,
    pub pos: Vec3<T>,
    pub converged: bool,
    pub iters: usize,
}

/// Equi-spaced minimum-distance indicator per ray:
/// sigma = phi(k * min_t d(o + t r)). Values <= 0.5 indicate a crossing.
/// Rays whose range is empty get sigma = 1 (no surface locatable).
pub fn sigma_batch<T: Scalar>(
    field: &dyn DistanceField<T>,
    rays: &[Ray<T>],
    t_ranges: &[(T, T)],
    n_steps: usize,
    k: T,
) -> Vec<T> {
    assert!(n_steps >= 2);
    assert_eq!(rays.len(), t_ranges.len());
    let live: Vec<usize> = (0..rays.len())
        .filter(|&i| t_ranges[i].1 > t_ranges[i].0)
        .collect();
    let mut pts = Vec::with_capacity(live.len() * n_steps);
    for &i in &live {
        let (t0, t1) = t_ranges[i];
        let dt = (t1 - t0) / T::c((n_steps - 1) as f64);
        for s in 0..n_steps {
            pts.push(rays[i].at(t0 + dt * T::c(s as f64)));
        }
    }
    let d = field.distance_batch(&pts);
    let mut out = vec![T::one(); rays.len()];
    for (row, &i) in d.chunks(n_steps).zip(&live) {
        let m = row.iter().fold(T::infinity(), |acc, &v| acc.min(v));
        out[i] = sigmoid_v(k * m);
    }
    out
}

/// Single-ray form of [`sigma_batch`].
pub fn ray_sigma<T: Scalar>(
    field: &dyn DistanceField<T>,
    ray: &Ray<T>,
    t_range: (T, T),
    n_steps: usize,
    k: T,
) -> T {
    sigma_batch(field, &[*ray], &[t_range], n_steps, k)[0]
}

/// Graph form over a precomputed `[n_rays, n_steps]` distance node and a
/// scalar k node; gradient flows through the minimizing sample.
pub fn sigma_node<T: Scalar>(g: &mut ValueGraph<T>, d: NodeId, k: NodeId) -> NodeId {
    let m = g.shape(d)[0];
    let dmin = g.min_axis1(d);
    let kb = g.broadcast_to(k, vec![m]);
    let kd = g.mul(kb, dmin);
    g.sigmoid(kd)
}

/// Sphere trace one ray. Front starts at `t_range.0` and steps along +r by
/// the distance value; back starts at `t_range.1` and steps along -r.
/// Returns the last iterate with a convergence flag; leaving the padded
/// range is a miss (`None`).
pub fn sphere_trace<T: Scalar>(
    field: &dyn DistanceField<T>,
    ray: &Ray<T>,
    side: TraceSide,
    t_range: (T, T),
    cfg: &TraceConfig<T>,
) -> Option<TraceHit<T>> {
    let (t0, t1) = t_range;
    let pad = (t1 - t0) * T::c(0.05);
    let mut t = match side {
        TraceSide::Front => t0,
        TraceSide::Back => t1,
    };
    for it in 0..cfg.max_iters {
        let pos = ray.at(t);
        let d = field.distance(pos);
        if d.abs() < cfg.eps_hit {
            return Some(TraceHit {
                t,
                pos,
                converged: true,
                iters: it,
            });
        }
        t = match side {
            TraceSide::Front => t + d,
            TraceSide::Back => t - d,
        };
        if t < t0 - pad || t > t1 + pad {
            return None;
        }
    }
    let pos = ray.at(t);
    Some(TraceHit {
        t,
        pos,
        converged: false,
        iters: cfg.max_iters,
    })
}

/// Batched tracing: the field is evaluated once per iteration over all
/// still-active rays.
pub fn sphere_trace_batch<T: Scalar>(
    field: &dyn DistanceField<T>,
    rays: &[Ray<T>],
    side: TraceSide,
    t_ranges: &[(T, T)],
    cfg: &TraceConfig<T>,
) -> Vec<Option<TraceHit<T>>> {
    let n = rays.len();
    let mut out: Vec<Option<TraceHit<T>>> = vec![None; n];
    let mut t: Vec<T> = t_ranges
        .iter()
        .map(|&(t0, t1)| match side {
            TraceSide::Front => t0,
            TraceSide::Back => t1,
        })
        .collect();
    let mut active: Vec<usize> = (0..n).collect();
    for it in 0..cfg.max_iters {
        if active.is_empty() {
            break;
        }
        let pts: Vec<Vec3<T>> = active.iter().map(|&i| rays[i].at(t[i])).collect();
        let d = field.distance_batch(&pts);
        let mut next_active = Vec::with_capacity(active.len());
        for (ai, &i) in active.iter().enumerate() {
            let di = d[ai];
            if di.abs() < cfg.eps_hit {
                out[i] = Some(TraceHit {
                    t: t[i],
                    pos: pts[ai],
                    converged: true,
                    iters: it,
                });
                continue;
            }
            let (t0, t1) = t_ranges[i];
            let pad = (t1 - t0) * T::c(0.05);
            let tn = match side {
                TraceSide::Front => t[i] + di,
                TraceSide::Back => t[i] - di,
            };
            if tn < t0 - pad || tn > t1 + pad {
                out[i] = None; // diverged out of the scene box
                continue;
            }
            t[i] = tn;
            next_active.push(i);
        }
        active = next_active;
    }
    for &i in &active {
        out[i] = Some(TraceHit {
            t: t[i],
            pos: rays[i].at(t[i]),
            converged: false,
            iters: cfg.max_iters,
        });
    }
    out
}

/// The first-order re-expression of traced hits that is differentiable in
/// the network parameters: x = x_t - (r / (n_t . r)) d(x_t), with x_t, r
/// and n_t held constant and `d` a live graph node of shape `[m]`.
/// Returns the `[m,3]` intersection node.
pub fn detached_intersection_node<T: Scalar>(
    g: &mut ValueGraph<T>,
    x_t: &[Vec3<T>],
    ray_dirs: &[Vec3<T>],
    normals: &[Vec3<T>],
    d: NodeId,
) -> NodeId {
    let m = x_t.len();
    assert_eq!(g.shape(d), &[m]);
    let mut xt_flat = Vec::with_capacity(3 * m);
    let mut coef = Vec::with_capacity(3 * m);
    for i in 0..m {
        let ndot = vec3::dot(normals[i], ray_dirs[i]);
        debug_assert!(ndot.abs() > T::zero(), "grazing rays must be filtered");
        xt_flat.extend_from_slice(&x_t[i]);
        coef.extend_from_slice(&vec3::scale(ray_dirs[i], T::one() / ndot));
    }
    let xt = g.constant(TensorData::matrix(m, 3, xt_flat));
    let cf = g.constant(TensorData::matrix(m, 3, coef));
    let dwide = g.expand_cols(d, 3);
    let step = g.mul(cf, dwide);
    g.sub(xt, step)
}

/// Per-ray record of a traced training patch.
#[derive(Debug, Clone)]
pub struct PatchRay<T> {
    /// Pixel (x, y) in the full image.
    pub pixel: (usize, usize),
    /// Ground-truth shaded color at the pixel.
    pub color: Vec3<T>,
    /// 0 = foreground, 1 = background (from the alpha mask).
    pub mask_label: u8,
    pub gt_albedo_front: Vec3<T>,
    pub gt_albedo_back: Vec3<T>,
    /// Only computed for foreground rays.
    pub sigma: Option<T>,
    pub ray: Ray<T>,
}

/// A selected (surface-locating) ray with both intersections.
#[derive(Debug, Clone)]
pub struct SelectedRay<T> {
    /// Index into `PatchRays::rays`.
    pub index: usize,
    pub front_pos: Vec3<T>,
    pub front_normal: Vec3<T>,
    pub front_t: T,
    pub back_pos: Vec3<T>,
    pub back_normal: Vec3<T>,
    pub back_t: T,
}

/// A rectangular bundle of rays with trace results.
#[derive(Debug, Clone)]
pub struct RayPatch<T> {
    pub size: usize,
    /// Pixel spacing (stride + 1).
    pub spacing: usize,
    pub rays: Vec<PatchRay<T>>,
    pub selected: Vec<SelectedRay<T>>,
}

#[derive(Debug, Clone, Copy)]
pub struct PatchSpec {
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
    /// 0..=3: rays sample every (stride+1)-th pixel.
    pub stride: usize,
}

impl PatchSpec {
    pub fn spacing(&self) -> usize {
        self.stride + 1
    }

    pub fn extent(&self) -> usize {
        (self.size - 1) * self.spacing() + 1
    }
}

/// Ground-truth buffers a patch samples from.
pub struct GtBuffers<'a, T> {
    pub shaded: &'a ImageBuf<T>,
    pub albedo_front: &'a ImageBuf<T>,
    pub albedo_back: &'a ImageBuf<T>,
    pub alpha: &'a ImageBuf<T>,
}

fn px3<T: Scalar>(img: &ImageBuf<T>, x: usize, y: usize) -> Vec3<T> {
    let p = img.pixel(x, y);
    [p[0], p[1], p[2]]
}

/// Trace a training patch: sigma over foreground rays, selection of the
/// surface-locating set, and front/back sphere tracing with grazing and
/// non-converged rays dropped. Patches that contain only background are
/// rejected.
pub fn render_patch<T: Scalar, F: SurfaceField<T>>(
    field: &F,
    camera: &Camera<T>,
    spec: &PatchSpec,
    gt: &GtBuffers<'_, T>,
    scene_box: &Aabb<T>,
    k: T,
    cfg: &TraceConfig<T>,
) -> Result<RayPatch<T>> {
    let (iw, ih) = camera.image_size;
    if spec.x0 + spec.extent() > iw || spec.y0 + spec.extent() > ih {
        return Err(Error::Config(format!(
            "patch {:?} exceeds {}x{} image",
            (spec.x0, spec.y0, spec.size, spec.stride),
            iw,
            ih
        )));
    }
    let spacing = spec.spacing();
    let mut rays = Vec::with_capacity(spec.size * spec.size);
    for j in 0..spec.size {
        for i in 0..spec.size {
            let x = spec.x0 + i * spacing;
            let y = spec.y0 + j * spacing;
            let fg = gt.alpha.pixel(x, y)[0] > T::c(0.5);
            rays.push(PatchRay {
                pixel: (x, y),
                color: px3(gt.shaded, x, y),
                mask_label: if fg { 0 } else { 1 },
                gt_albedo_front: px3(gt.albedo_front, x, y),
                gt_albedo_back: px3(gt.albedo_back, x, y),
                sigma: None,
                ray: camera.generate_ray([T::c(x as f64), T::c(y as f64)]),
            });
        }
    }
    if rays.iter().all(|r| r.mask_label == 1) {
        return Err(Error::BackgroundPatch);
    }

    // sigma pass on foreground rays only; background rays can never join
    // the selected set (selection needs both sigma <= 0.5 and label 0)
    let fg_idx: Vec<usize> = (0..rays.len()).filter(|&i| rays[i].mask_label == 0).collect();
    let fg_rays: Vec<Ray<T>> = fg_idx.iter().map(|&i| rays[i].ray).collect();
    let ranges: Vec<(T, T)> = fg_rays
        .iter()
        .map(|r| {
            scene_box
                .ray_range(r.origin, r.dir)
                .map(|(a, b)| (a.max(T::zero()), b))
                .unwrap_or((T::zero(), T::zero()))
        })
        .collect();
    let sigmas = sigma_batch(field, &fg_rays, &ranges, cfg.sigma_steps, k);
    for (&i, &s) in fg_idx.iter().zip(&sigmas) {
        rays[i].sigma = Some(s);
    }

    // select and trace
    let cand: Vec<usize> = fg_idx
        .iter()
        .zip(&sigmas)
        .filter(|(_, &s)| s <= T::c(0.5))
        .map(|(&i, _)| i)
        .collect();
    let cand_rays: Vec<Ray<T>> = cand.iter().map(|&i| rays[i].ray).collect();
    let cand_ranges: Vec<(T, T)> = cand
        .iter()
        .map(|&i| {
            scene_box
                .ray_range(rays[i].ray.origin, rays[i].ray.dir)
                .map(|(a, b)| (a.max(T::zero()), b))
                .unwrap()
        })
        .collect();
    let fronts = sphere_trace_batch(field, &cand_rays, TraceSide::Front, &cand_ranges, cfg);
    let backs = sphere_trace_batch(field, &cand_rays, TraceSide::Back, &cand_ranges, cfg);

    let hit_pts: Vec<Vec3<T>> = fronts
        .iter()
        .chain(backs.iter())
        .filter_map(|h| h.as_ref().filter(|h| h.converged).map(|h| h.pos))
        .collect();
    let hit_normals = field.normal_batch(&hit_pts);
    let mut normal_iter = hit_normals.into_iter();

    let mut selected = Vec::new();
    let mut front_normals: Vec<Option<Vec3<T>>> = Vec::with_capacity(cand.len());
    for f in &fronts {
        front_normals.push(match f {
            Some(h) if h.converged => Some(normal_iter.next().unwrap()),
            _ => None,
        });
    }
    let mut back_normals: Vec<Option<Vec3<T>>> = Vec::with_capacity(cand.len());
    for b in &backs {
        back_normals.push(match b {
            Some(h) if h.converged => Some(normal_iter.next().unwrap()),
            _ => None,
        });
    }
    for (ci, &i) in cand.iter().enumerate() {
        let (Some(fh), Some(bh)) = (&fronts[ci], &backs[ci]) else {
            continue;
        };
        if !fh.converged || !bh.converged {
            continue;
        }
        let (Some(fnrm), Some(bnrm)) = (front_normals[ci], back_normals[ci]) else {
            continue;
        };
        let dir = rays[i].ray.dir;
        // grazing intersections make the detached re-expression
        // ill-conditioned; those rays are dropped from the selected set
        if vec3::dot(vec3::normalize(fnrm), dir).abs() < cfg.eps_grazing
            || vec3::dot(vec3::normalize(bnrm), dir).abs() < cfg.eps_grazing
        {
            continue;
        }
        selected.push(SelectedRay {
            index: i,
            front_pos: fh.pos,
            front_normal: fnrm,
            front_t: fh.t,
            back_pos: bh.pos,
            back_normal: bnrm,
            back_t: bh.t,
        });
    }

    Ok(RayPatch {
        size: spec.size,
        spacing,
        rays,
        selected,
    })
}

/// Inference render: shaded color, front/back albedo, normal map, alpha.
pub struct RenderOutputs<T> {
    pub shaded: ImageBuf<T>,
    pub albedo_front: ImageBuf<T>,
    pub albedo_back: ImageBuf<T>,
    pub normal: ImageBuf<T>,
    pub alpha: ImageBuf<T>,
}

/// Map world normal to normal-map RGB: camera frame with +z toward the
/// viewer, encoded (n+1)/2.
pub fn encode_normal<T: Scalar>(cam: &Camera<T>, n_world: Vec3<T>) -> Vec3<T> {
    let nc = crate::geom::camera::rot_apply(&cam.orientation, n_world);
    let half = T::c(0.5);
    [
        nc[0] * half + half,
        nc[1] * half + half,
        -nc[2] * half + half,
    ]
}

/// Inverse of [`encode_normal`].
pub fn decode_normal<T: Scalar>(cam: &Camera<T>, rgb: Vec3<T>) -> Vec3<T> {
    let two = T::c(2.0);
    let nc = [
        rgb[0] * two - T::one(),
        rgb[1] * two - T::one(),
        -(rgb[2] * two - T::one()),
    ];
    crate::geom::camera::rot_transpose_apply(&cam.orientation, nc)
}

/// Render every pixel by sphere tracing. `shade` maps world normals to
/// per-point shading RGB (flat `[n*3]`).
pub fn render_full<T: Scalar, F: SurfaceField<T>>(
    field: &F,
    shade: &dyn Fn(&[Vec3<T>]) -> Vec<T>,
    camera: &Camera<T>,
    scene_box: &Aabb<T>,
    cfg: &TraceConfig<T>,
) -> RenderOutputs<T> {
    let (w, h) = camera.image_size;
    let mut rays = Vec::with_capacity(w * h);
    let mut ranges = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let ray = camera.generate_ray([T::c(x as f64), T::c(y as f64)]);
            let range = scene_box
                .ray_range(ray.origin, ray.dir)
                .map(|(a, b)| (a.max(T::zero()), b))
                .unwrap_or((T::zero(), T::zero()));
            rays.push(ray);
            ranges.push(range);
        }
    }
    let fronts = sphere_trace_batch(field, &rays, TraceSide::Front, &ranges, cfg);
    let backs = sphere_trace_batch(field, &rays, TraceSide::Back, &ranges, cfg);

    let fg: Vec<usize> = (0..rays.len())
        .filter(|&i| matches!(&fronts[i], Some(h) if h.converged))
        .collect();
    let front_pts: Vec<Vec3<T>> = fg.iter().map(|&i| fronts[i].unwrap().pos).collect();
    let albedo_f = field.albedo_batch(&front_pts);
    let normals: Vec<Vec3<T>> = field.normal_batch(&front_pts);
    let unit_normals: Vec<Vec3<T>> = normals.iter().map(|&n| vec3::normalize(n)).collect();
    let shading = shade(&unit_normals);

    let bg_hit: Vec<usize> = fg
        .iter()
        .copied()
        .filter(|&i| matches!(&backs[i], Some(h) if h.converged))
        .collect();
    let back_pts: Vec<Vec3<T>> = bg_hit.iter().map(|&i| backs[i].unwrap().pos).collect();
    let albedo_b = field.albedo_batch(&back_pts);

    let mut out = RenderOutputs {
        shaded: ImageBuf::new(w, h, 3),
        albedo_front: ImageBuf::new(w, h, 3),
        albedo_back: ImageBuf::new(w, h, 3),
        normal: ImageBuf::from_data(w, h, 3, vec![T::c(0.5); w * h * 3]),
        alpha: ImageBuf::new(w, h, 1),
    };
    for (k_i, &i) in fg.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        out.alpha.pixel_mut(x, y)[0] = T::one();
        let af = &albedo_f[3 * k_i..3 * k_i + 3];
        out.albedo_front.pixel_mut(x, y).copy_from_slice(af);
        let s = &shading[3 * k_i..3 * k_i + 3];
        let c = [af[0] * s[0], af[1] * s[1], af[2] * s[2]];
        out.shaded.pixel_mut(x, y).copy_from_slice(&c);
        let enc = encode_normal(camera, unit_normals[k_i]);
        out.normal.pixel_mut(x, y).copy_from_slice(&enc);
    }
    for (k_i, &i) in bg_hit.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        out.albedo_back
            .pixel_mut(x, y)
            .copy_from_slice(&albedo_b[3 * k_i..3 * k_i + 3]);
    }
    out
}
