//! Supervision samples: area-uniform surface points, labeled near-surface
//! and uniform free points, parity-based inside/outside classification and
//! nearest-surface albedo lookup.

use super::bvh::Bvh;
use super::mesh::TriMesh;
use super::vec3::{self, Aabb, Vec3};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;
use rand_distr::StandardNormal;

pub const LABEL_INSIDE: u8 = 0;
pub const LABEL_OUTSIDE: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample<T> {
    pub pos: Vec3<T>,
    pub normal: Vec3<T>,
    pub albedo: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearSample<T> {
    pub pos: Vec3<T>,
    pub label: u8,
    /// Albedo of the nearest surface point.
    pub albedo_nn: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSample<T> {
    pub pos: Vec3<T>,
    pub label: u8,
}

/// The per-example supervision bundle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet<T> {
    pub surface: Vec<SurfaceSample<T>>,
    pub near: Vec<NearSample<T>>,
    pub uniform: Vec<FreeSample<T>>,
}

#[derive(Debug, Clone, Copy)]
pub struct SampleCounts {
    pub surface: usize,
    pub near: usize,
    pub uniform: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            surface: 512,
            near: 512,
            uniform: 512,
        }
    }
}

/// Precomputed sampling context for one mesh.
pub struct MeshSampler<'m, T> {
    pub mesh: &'m TriMesh<T>,
    pub bvh: Bvh<T>,
    cumulative_area: Vec<T>,
    bbox: Aabb<T>,
}

impl<'m, T: Scalar> MeshSampler<'m, T> {
    pub fn new(mesh: &'m TriMesh<T>) -> Self {
        let mut cumulative_area = Vec::with_capacity(mesh.triangles.len());
        let mut acc = T::zero();
        for t in 0..mesh.triangles.len() {
            acc += mesh.tri_area(t);
            cumulative_area.push(acc);
        }
        Self {
            mesh,
            bvh: Bvh::build(mesh),
            cumulative_area,
            bbox: mesh.bbox(),
        }
    }

    /// One area-uniform surface sample with interpolated normal and albedo.
    pub fn sample_surface<R: Rng>(&self, rng: &mut R) -> SurfaceSample<T> {
        let total = *self.cumulative_area.last().unwrap();
        let r = T::c(rng.gen_range(0.0..1.0)) * total;
        let t = match self
            .cumulative_area
            .binary_search_by(|v| v.partial_cmp(&r).unwrap_or(std::cmp::Ordering::Equal))
        {
            Ok(i) | Err(i) => i.min(self.cumulative_area.len() - 1),
        };
        // uniform barycentric via the sqrt trick
        let su = T::c(rng.gen_range(0.0f64..1.0)).sqrt();
        let v = T::c(rng.gen_range(0.0f64..1.0));
        let b = [T::one() - su, su * (T::one() - v), su * v];
        let [va, vb, vc] = self.mesh.tri_vertices(t);
        let idx = self.mesh.triangles[t];
        let pos = [
            va[0] * b[0] + vb[0] * b[1] + vc[0] * b[2],
            va[1] * b[0] + vb[1] * b[1] + vc[1] * b[2],
            va[2] * b[0] + vb[2] * b[1] + vc[2] * b[2],
        ];
        let interp = |attr: &[Vec3<T>]| -> Vec3<T> {
            let [a0, a1, a2] = [
                attr[idx[0] as usize],
                attr[idx[1] as usize],
                attr[idx[2] as usize],
            ];
            [
                a0[0] * b[0] + a1[0] * b[1] + a2[0] * b[2],
                a0[1] * b[0] + a1[1] * b[1] + a2[1] * b[2],
                a0[2] * b[0] + a1[2] * b[1] + a2[2] * b[2],
            ]
        };
        SurfaceSample {
            pos,
            normal: vec3::normalize(interp(&self.mesh.vertex_normals)),
            albedo: interp(&self.mesh.vertex_albedo),
        }
    }

    /// Parity-based inside/outside label: majority vote over `votes`
    /// random-direction parity casts; degenerate casts are retried with a
    /// fresh direction.
    pub fn inside_outside<R: Rng>(&self, x: Vec3<T>, rng: &mut R) -> u8 {
        // quick reject: outside the mesh bounds is always outside
        if !self.bbox.contains(x) {
            return LABEL_OUTSIDE;
        }
        let votes = 3;
        let mut inside_votes = 0;
        let mut cast = 0;
        let mut attempts = 0;
        while cast < votes && attempts < 64 {
            attempts += 1;
            let dir = random_unit_dir(rng);
            match self.bvh.ray_crossings(self.mesh, x, dir, T::zero()) {
                Some(hits) => {
                    cast += 1;
                    if hits.len() % 2 == 1 {
                        inside_votes += 1;
                    }
                }
                None => continue, // grazing hit, re-cast
            }
        }
        if inside_votes * 2 > cast {
            LABEL_INSIDE
        } else {
            LABEL_OUTSIDE
        }
    }

    /// Albedo of the closest surface point.
    pub fn nearest_albedo(&self, x: Vec3<T>) -> Vec3<T> {
        let (_, t, _, bary) = self.bvh.closest_point(self.mesh, x);
        let idx = self.mesh.triangles[t as usize];
        let a = self.mesh.vertex_albedo[idx[0] as usize];
        let b = self.mesh.vertex_albedo[idx[1] as usize];
        let c = self.mesh.vertex_albedo[idx[2] as usize];
        [
            a[0] * bary[0] + b[0] * bary[1] + c[0] * bary[2],
            a[1] * bary[0] + b[1] * bary[1] + c[1] * bary[2],
            a[2] * bary[0] + b[2] * bary[1] + c[2] * bary[2],
        ]
    }
}

fn random_unit_dir<T: Scalar, R: Rng>(rng: &mut R) -> Vec3<T> {
    loop {
        let v: Vec3<T> = [
            T::c(rng.sample(StandardNormal)),
            T::c(rng.sample(StandardNormal)),
            T::c(rng.sample(StandardNormal)),
        ];
        let n = vec3::norm(v);
        if n > T::c(1e-6) {
            return vec3::scale(v, T::one() / n);
        }
    }
}

/// Draw the full supervision set for one mesh. Labels come from mesh ray
/// parity, so the mesh must be watertight.
pub fn sample_mesh<T: Scalar, R: Rng>(
    mesh: &TriMesh<T>,
    counts: SampleCounts,
    near_sigma: T,
    bbox: &Aabb<T>,
    rng: &mut R,
) -> Result<SampleSet<T>> {
    mesh.require_watertight()?;
    if mesh.triangles.is_empty() {
        return Err(Error::DegenerateMesh);
    }
    let sampler = MeshSampler::new(mesh);
    let mut set = SampleSet::default();
    for _ in 0..counts.surface {
        set.surface.push(sampler.sample_surface(rng));
    }
    for _ in 0..counts.near {
        let s = sampler.sample_surface(rng);
        let off: Vec3<T> = [
            T::c(rng.sample::<f64, _>(StandardNormal)) * near_sigma,
            T::c(rng.sample::<f64, _>(StandardNormal)) * near_sigma,
            T::c(rng.sample::<f64, _>(StandardNormal)) * near_sigma,
        ];
        let pos = vec3::add(s.pos, off);
        let label = sampler.inside_outside(pos, rng);
        let albedo_nn = sampler.nearest_albedo(pos);
        set.near.push(NearSample {
            pos,
            label,
            albedo_nn,
        });
    }
    for _ in 0..counts.uniform {
        let pos = [
            T::c(rng.gen_range(bbox.min[0].to_f64_lossy()..bbox.max[0].to_f64_lossy())),
            T::c(rng.gen_range(bbox.min[1].to_f64_lossy()..bbox.max[1].to_f64_lossy())),
            T::c(rng.gen_range(bbox.min[2].to_f64_lossy()..bbox.max[2].to_f64_lossy())),
        ];
        let label = sampler.inside_outside(pos, rng);
        set.uniform.push(FreeSample { pos, label });
    }
    Ok(set)
}
