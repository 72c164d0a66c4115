//! Surface extraction: coarse bounding-box probing, octree-refined
//! marching cubes with batched field queries, a dense single-pass
//! reference extractor, and vertex coloring.

pub mod tables;

use crate::error::{Error, Result};
use crate::field::{DistanceField, SurfaceField};
use crate::geom::mesh::TriMesh;
use crate::geom::vec3::{self, Aabb, Vec3};
use crate::scalar::Scalar;
use std::collections::HashMap;
use tables::{case_table, edge_axis, CORNER_OFFSET, EDGE_CORNERS};

/// Field queries are issued in batches of this many points (64^3).
pub const DEFAULT_QUERY_BATCH: usize = 64 * 64 * 64;

/// Safety factor on the eikonal refinement bound, for fields that are only
/// approximately unit-gradient.
const REFINE_SAFETY: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct MeshingReport {
    /// Lattice cells that were marched (had a sign change).
    pub cells: Vec<(u32, u32, u32)>,
}

/// Lattice corner position; the single source of truth for both
/// extraction paths so their classifications agree exactly.
#[inline]
fn lattice_pos<T: Scalar>(bounds: &Aabb<T>, res: usize, i: usize, j: usize, k: usize) -> Vec3<T> {
    let e = bounds.extent();
    let r = T::c(res as f64);
    [
        bounds.min[0] + e[0] * (T::c(i as f64) / r),
        bounds.min[1] + e[1] * (T::c(j as f64) / r),
        bounds.min[2] + e[2] * (T::c(k as f64) / r),
    ]
}

fn batched_eval<T: Scalar>(
    field: &dyn DistanceField<T>,
    pts: &[Vec3<T>],
    batch: usize,
) -> Vec<T> {
    let mut out = Vec::with_capacity(pts.len());
    for chunk in pts.chunks(batch.max(1)) {
        out.extend(field.distance_batch(chunk));
    }
    out
}

/// Approximate the surface bounding box by probing a coarse lattice and
/// keeping the cells with sign changes, padded by one cell.
pub fn probe_bbox<T: Scalar>(
    field: &dyn DistanceField<T>,
    search: &Aabb<T>,
    coarse_res: usize,
) -> Result<Aabb<T>> {
    let n = coarse_res + 1;
    let mut pts = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                pts.push(lattice_pos(search, coarse_res, i, j, k));
            }
        }
    }
    let d = batched_eval(field, &pts, DEFAULT_QUERY_BATCH);
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let mut bb = Aabb::empty();
    let mut found = false;
    for k in 0..coarse_res {
        for j in 0..coarse_res {
            for i in 0..coarse_res {
                let mut neg = false;
                let mut pos = false;
                for off in CORNER_OFFSET {
                    if d[idx(i + off[0], j + off[1], k + off[2])] < T::zero() {
                        neg = true;
                    } else {
                        pos = true;
                    }
                }
                if neg && pos {
                    found = true;
                    bb.grow(lattice_pos(search, coarse_res, i, j, k));
                    bb.grow(lattice_pos(search, coarse_res, i + 1, j + 1, k + 1));
                }
            }
        }
    }
    if !found {
        return Err(Error::EmptySurface);
    }
    // pad one coarse cell, clamped to the search region
    let cell = vec3::scale(search.extent(), T::one() / T::c(coarse_res as f64));
    let mut out = Aabb::new(vec3::sub(bb.min, cell), vec3::add(bb.max, cell));
    for a in 0..3 {
        out.min[a] = out.min[a].max(search.min[a]);
        out.max[a] = out.max[a].min(search.max[a]);
    }
    Ok(out)
}

/// March a set of lattice cells given a corner-value lookup. Vertices on
/// shared edges are deduplicated, so the output is watertight wherever the
/// cell set covers the surface.
fn march_cells<T: Scalar>(
    bounds: &Aabb<T>,
    res: usize,
    cells: &[(u32, u32, u32)],
    corner_val: &dyn Fn(usize, usize, usize) -> T,
) -> (TriMesh<T>, MeshingReport) {
    let table = case_table();
    let mut vertices: Vec<Vec3<T>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut edge_cache: HashMap<(u32, u32, u32, u8), u32> = HashMap::new();
    let mut marched = Vec::new();

    for &(ci, cj, ck) in cells {
        let (ci, cj, ck) = (ci as usize, cj as usize, ck as usize);
        let mut d = [T::zero(); 8];
        let mut config = 0usize;
        for (c, off) in CORNER_OFFSET.iter().enumerate() {
            d[c] = corner_val(ci + off[0], cj + off[1], ck + off[2]);
            if d[c] < T::zero() {
                config |= 1 << c;
            }
        }
        if config == 0 || config == 255 {
            continue;
        }
        marched.push((ci as u32, cj as u32, ck as u32));
        let mut edge_vertex = [u32::MAX; 12];
        for tri in &table[config] {
            for &e in tri {
                let e = e as usize;
                if edge_vertex[e] != u32::MAX {
                    continue;
                }
                let (a, b) = EDGE_CORNERS[e];
                let oa = CORNER_OFFSET[a];
                let key = (
                    (ci + oa[0]) as u32,
                    (cj + oa[1]) as u32,
                    (ck + oa[2]) as u32,
                    edge_axis(e) as u8,
                );
                let vid = *edge_cache.entry(key).or_insert_with(|| {
                    let ob = CORNER_OFFSET[b];
                    let pa = lattice_pos(bounds, res, ci + oa[0], cj + oa[1], ck + oa[2]);
                    let pb = lattice_pos(bounds, res, ci + ob[0], cj + ob[1], ck + ob[2]);
                    let t = d[a] / (d[a] - d[b]);
                    let p = vec3::lerp(pa, pb, t);
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                });
                edge_vertex[e] = vid;
            }
            triangles.push([
                edge_vertex[tri[0] as usize],
                edge_vertex[tri[1] as usize],
                edge_vertex[tri[2] as usize],
            ]);
        }
    }

    let normals = face_average_normals(&vertices, &triangles);
    let albedo = vec![[T::c(0.7); 3]; vertices.len()];
    (
        TriMesh::new(vertices, triangles, normals, albedo),
        MeshingReport { cells: marched },
    )
}

fn face_average_normals<T: Scalar>(vertices: &[Vec3<T>], triangles: &[[u32; 3]]) -> Vec<Vec3<T>> {
    let mut acc = vec![[T::zero(); 3]; vertices.len()];
    for t in triangles {
        let a = vertices[t[0] as usize];
        let b = vertices[t[1] as usize];
        let c = vertices[t[2] as usize];
        let n = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        for &i in t {
            acc[i as usize] = vec3::add(acc[i as usize], n);
        }
    }
    acc.into_iter()
        .map(|n| {
            let nn = vec3::normalize(n);
            if vec3::norm(nn) == T::zero() {
                [T::zero(), T::zero(), T::one()]
            } else {
                nn
            }
        })
        .collect()
}

/// Classic single-pass marching cubes over the full lattice; the reference
/// oracle for the octree extractor.
pub fn extract_dense<T: Scalar>(
    field: &dyn DistanceField<T>,
    bounds: &Aabb<T>,
    res: usize,
) -> (TriMesh<T>, MeshingReport) {
    let n = res + 1;
    let mut pts = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                pts.push(lattice_pos(bounds, res, i, j, k));
            }
        }
    }
    let d = batched_eval(field, &pts, DEFAULT_QUERY_BATCH);
    let mut cells = Vec::new();
    for k in 0..res as u32 {
        for j in 0..res as u32 {
            for i in 0..res as u32 {
                cells.push((i, j, k));
            }
        }
    }
    let lookup = move |i: usize, j: usize, k: usize| d[(k * n + j) * n + i];
    march_cells(bounds, res, &cells, &lookup)
}

/// Octree-refined extraction: subdivide nodes only while the center
/// distance admits a zero crossing (|d| <= safety * half-diagonal), then
/// march the surviving leaf cells on the same lattice as [`extract_dense`].
pub fn extract_octree<T: Scalar>(
    field: &dyn DistanceField<T>,
    bounds: &Aabb<T>,
    res: usize,
) -> Result<(TriMesh<T>, MeshingReport)> {
    if !res.is_power_of_two() {
        return Err(Error::Config(format!(
            "octree resolution must be a power of two, got {res}"
        )));
    }
    let levels = res.trailing_zeros() as usize;
    let ext = bounds.extent();

    // nodes at the current level, by lattice cell index of their min corner
    let mut nodes: Vec<(u32, u32, u32)> = vec![(0, 0, 0)];
    for level in 0..levels {
        let span = res >> level; // node size in lattice cells
        let half = T::c(0.5);
        // node min corner indices are in leaf-lattice units; the center
        // sits half a span further along each axis
        let s_half = T::c(span as f64) * half;
        let r = T::c(res as f64);
        let centers: Vec<Vec3<T>> = nodes
            .iter()
            .map(|&(i, j, k)| {
                [
                    bounds.min[0] + ext[0] * ((T::c(i as f64) + s_half) / r),
                    bounds.min[1] + ext[1] * ((T::c(j as f64) + s_half) / r),
                    bounds.min[2] + ext[2] * ((T::c(k as f64) + s_half) / r),
                ]
            })
            .collect();
        let d = batched_eval(field, &centers, DEFAULT_QUERY_BATCH);
        let half_diag = vec3::norm([
            ext[0] * T::c(span as f64) / T::c(res as f64),
            ext[1] * T::c(span as f64) / T::c(res as f64),
            ext[2] * T::c(span as f64) / T::c(res as f64),
        ]) * half;
        let bound = half_diag * T::c(REFINE_SAFETY);
        let mut next = Vec::new();
        let child = span / 2;
        for (idx, &(i, j, k)) in nodes.iter().enumerate() {
            if d[idx].abs() > bound {
                continue;
            }
            for off in CORNER_OFFSET {
                next.push((
                    i + (off[0] * child) as u32,
                    j + (off[1] * child) as u32,
                    k + (off[2] * child) as u32,
                ));
            }
        }
        nodes = next;
        if nodes.is_empty() {
            break;
        }
    }
    nodes.sort_unstable_by_key(|&(i, j, k)| (k, j, i));

    // evaluate the corners of surviving leaf cells, deduplicated
    let mut corner_idx: HashMap<(u32, u32, u32), usize> = HashMap::new();
    let mut pts = Vec::new();
    for &(i, j, k) in &nodes {
        for off in CORNER_OFFSET {
            let key = (i + off[0] as u32, j + off[1] as u32, k + off[2] as u32);
            if !corner_idx.contains_key(&key) {
                corner_idx.insert(key, pts.len());
                pts.push(lattice_pos(
                    bounds,
                    res,
                    key.0 as usize,
                    key.1 as usize,
                    key.2 as usize,
                ));
            }
        }
    }
    let d = batched_eval(field, &pts, DEFAULT_QUERY_BATCH);
    let lookup = move |i: usize, j: usize, k: usize| {
        d[corner_idx[&(i as u32, j as u32, k as u32)]]
    };
    Ok(march_cells(bounds, res, &nodes, &lookup))
}

/// Second color pass: query the field's color head at the vertex
/// positions. With `shade`, vertex colors become s(n) o albedo.
pub fn vertex_colors<T: Scalar, F: SurfaceField<T>>(
    field: &F,
    mesh: &mut TriMesh<T>,
    shade: Option<&dyn Fn(&[Vec3<T>]) -> Vec<T>>,
) {
    let mut albedo = Vec::with_capacity(mesh.vertices.len() * 3);
    for chunk in mesh.vertices.chunks(DEFAULT_QUERY_BATCH) {
        albedo.extend(field.albedo_batch(chunk));
    }
    if let Some(shade) = shade {
        let s = shade(&mesh.vertex_normals);
        for (a, sv) in albedo.iter_mut().zip(&s) {
            *a = *a * *sv;
        }
    }
    mesh.vertex_albedo = albedo
        .chunks(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
}

pub use crate::geom::mesh_io::{export_mesh, import_mesh};
