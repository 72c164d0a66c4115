//! Indexed triangle mesh with per-vertex normals and albedo.

use super::vec3::{self, Aabb, Vec3};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    pub vertex_normals: Vec<Vec3<T>>,
    /// RGB in [0,1] per vertex.
    pub vertex_albedo: Vec<Vec3<T>>,
}

impl<T: Scalar> TriMesh<T> {
    pub fn new(
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[u32; 3]>,
        vertex_normals: Vec<Vec3<T>>,
        vertex_albedo: Vec<Vec3<T>>,
    ) -> Self {
        Self {
            vertices,
            triangles,
            vertex_normals,
            vertex_albedo,
        }
    }

    pub fn tri_vertices(&self, t: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn tri_area(&self, t: usize) -> T {
        let [a, b, c] = self.tri_vertices(t);
        vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a))) * T::c(0.5)
    }

    pub fn face_normal(&self, t: usize) -> Vec3<T> {
        let [a, b, c] = self.tri_vertices(t);
        vec3::normalize(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)))
    }

    pub fn bbox(&self) -> Aabb<T> {
        let mut b = Aabb::empty();
        for &v in &self.vertices {
            b.grow(v);
        }
        b
    }

    pub fn total_area(&self) -> T {
        (0..self.triangles.len()).fold(T::zero(), |acc, t| acc + self.tri_area(t))
    }

    /// Index validity and unit normals.
    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() || self.triangles.is_empty() {
            return Err(Error::DegenerateMesh);
        }
        let n = self.vertices.len() as u32;
        for t in &self.triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Format("triangle index out of range".into()));
            }
        }
        if self.vertex_normals.len() != self.vertices.len() {
            return Err(Error::Format("normal count mismatch".into()));
        }
        let tol = T::c(1e-5);
        for nrm in &self.vertex_normals {
            if (vec3::norm(*nrm) - T::one()).abs() > tol {
                return Err(Error::Format("vertex normal not unit length".into()));
            }
        }
        Ok(())
    }

    /// Number of edges not shared by exactly two triangles.
    pub fn open_edge_count(&self) -> usize {
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }

    pub fn is_watertight(&self) -> bool {
        self.open_edge_count() == 0
    }

    pub fn require_watertight(&self) -> Result<()> {
        let open = self.open_edge_count();
        if open != 0 {
            return Err(Error::NotWatertight(open));
        }
        Ok(())
    }

    /// V - E + F for closed meshes.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn cast<U: Scalar>(&self) -> TriMesh<U> {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| vec3::cast(v)).collect(),
            triangles: self.triangles.clone(),
            vertex_normals: self.vertex_normals.iter().map(|&v| vec3::cast(v)).collect(),
            vertex_albedo: self.vertex_albedo.iter().map(|&v| vec3::cast(v)).collect(),
        }
    }

    /// Apply `p -> scale * R p + t` to vertices (normals rotate only).
    pub fn transformed(&self, scale: T, rot: &[[T; 3]; 3], trans: Vec3<T>) -> TriMesh<T> {
        let rotp = |v: Vec3<T>| {
            [
                vec3::dot(rot[0], v),
                vec3::dot(rot[1], v),
                vec3::dot(rot[2], v),
            ]
        };
        TriMesh {
            vertices: self
                .vertices
                .iter()
                .map(|&v| vec3::add(vec3::scale(rotp(v), scale), trans))
                .collect(),
            triangles: self.triangles.clone(),
            vertex_normals: self.vertex_normals.iter().map(|&n| rotp(n)).collect(),
            vertex_albedo: self.vertex_albedo.clone(),
        }
    }
}

/// Icosphere used by tests and synthetic scenes: subdivided icosahedron
/// scaled to `radius`, exact analytic normals, constant albedo.
pub fn icosphere<T: Scalar>(radius: T, subdivisions: usize) -> TriMesh<T> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let base = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let mut verts: Vec<Vec3<f64>> = base
        .iter()
        .map(|&(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            [x / n, y / n, z / n]
        })
        .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let va = verts[a as usize];
                let vb = verts[b as usize];
                let m = [
                    (va[0] + vb[0]) / 2.0,
                    (va[1] + vb[1]) / 2.0,
                    (va[2] + vb[2]) / 2.0,
                ];
                let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                verts.push([m[0] / n, m[1] / n, m[2] / n]);
                (verts.len() - 1) as u32
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            new_faces.push([f[0], ab, ca]);
            new_faces.push([f[1], bc, ab]);
            new_faces.push([f[2], ca, bc]);
            new_faces.push([ab, bc, ca]);
        }
        faces = new_faces;
    }
    let r = radius.to_f64_lossy();
    let vertices: Vec<Vec3<T>> = verts
        .iter()
        .map(|&v| [T::c(v[0] * r), T::c(v[1] * r), T::c(v[2] * r)])
        .collect();
    let normals: Vec<Vec3<T>> = verts
        .iter()
        .map(|&v| [T::c(v[0]), T::c(v[1]), T::c(v[2])])
        .collect();
    let albedo = vec![[T::c(0.7); 3]; vertices.len()];
    TriMesh::new(vertices, faces, normals, albedo)
}
