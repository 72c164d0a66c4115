//! Bounding-volume hierarchy over mesh triangles: ray parity casts and
//! closest-point queries.

use super::mesh::TriMesh;
use super::vec3::{self, Aabb, Vec3};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct BvhNode<T> {
    bounds: Aabb<T>,
    /// Leaf: (first, count) into `order`; inner: (left, right) child index.
    a: u32,
    b: u32,
    leaf: bool,
}

#[derive(Debug, Clone)]
pub struct Bvh<T> {
    nodes: Vec<BvhNode<T>>,
    order: Vec<u32>,
}

const LEAF_SIZE: usize = 8;

impl<T: Scalar> Bvh<T> {
    pub fn build(mesh: &TriMesh<T>) -> Self {
        let n = mesh.triangles.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let centroids: Vec<Vec3<T>> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.tri_vertices(t);
                vec3::scale(vec3::add(vec3::add(a, b), c), T::c(1.0 / 3.0))
            })
            .collect();
        let mut nodes = Vec::new();
        Self::split(mesh, &centroids, &mut order, 0, n, &mut nodes);
        Self { nodes, order }
    }

    fn tri_bounds(mesh: &TriMesh<T>, t: usize) -> Aabb<T> {
        let mut b = Aabb::empty();
        for v in mesh.tri_vertices(t) {
            b.grow(v);
        }
        b
    }

    fn split(
        mesh: &TriMesh<T>,
        centroids: &[Vec3<T>],
        order: &mut [u32],
        first: usize,
        count: usize,
        nodes: &mut Vec<BvhNode<T>>,
    ) -> u32 {
        let mut bounds = Aabb::empty();
        for &t in &order[first..first + count] {
            bounds.merge(&Self::tri_bounds(mesh, t as usize));
        }
        let idx = nodes.len() as u32;
        nodes.push(BvhNode {
            bounds,
            a: first as u32,
            b: count as u32,
            leaf: true,
        });
        if count <= LEAF_SIZE {
            return idx;
        }
        // split at median of centroids along the longest axis
        let ext = bounds.extent();
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
            0
        } else if ext[1] >= ext[2] {
            1
        } else {
            2
        };
        order[first..first + count].sort_by(|&x, &y| {
            centroids[x as usize][axis]
                .partial_cmp(&centroids[y as usize][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let half = count / 2;
        let l = Self::split(mesh, centroids, order, first, half, nodes);
        let r = Self::split(mesh, centroids, order, first + half, count - half, nodes);
        nodes[idx as usize].a = l;
        nodes[idx as usize].b = r;
        nodes[idx as usize].leaf = false;
        idx
    }

    /// All ray-triangle crossings with `t > t_min`. Returns `None` when any
    /// hit is numerically degenerate (grazing an edge or near-parallel),
    /// in which case a parity caster should retry with a new direction.
    pub fn ray_crossings(
        &self,
        mesh: &TriMesh<T>,
        origin: Vec3<T>,
        dir: Vec3<T>,
        t_min: T,
    ) -> Option<Vec<(T, u32)>> {
        let mut hits = Vec::new();
        let mut stack = vec![0u32];
        let eps = T::c(1e-10);
        let bary_eps = T::c(1e-7);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_range(origin, dir).is_none() {
                continue;
            }
            if node.leaf {
                for &t in &self.order[node.a as usize..(node.a + node.b) as usize] {
                    let [va, vb, vc] = mesh.tri_vertices(t as usize);
                    let e1 = vec3::sub(vb, va);
                    let e2 = vec3::sub(vc, va);
                    let p = vec3::cross(dir, e2);
                    let det = vec3::dot(e1, p);
                    if det.abs() < eps {
                        // parallel or degenerate triangle; only degenerate
                        // if the ray actually passes near its plane slab
                        let tv = vec3::sub(origin, va);
                        let n = vec3::cross(e1, e2);
                        let plane_d = vec3::dot(tv, n).abs();
                        if plane_d < T::c(1e-9) {
                            return None;
                        }
                        continue;
                    }
                    let inv = T::one() / det;
                    let tv = vec3::sub(origin, va);
                    let u = vec3::dot(tv, p) * inv;
                    let q = vec3::cross(tv, e1);
                    let v = vec3::dot(dir, q) * inv;
                    let w = T::one() - u - v;
                    if u < -bary_eps || v < -bary_eps || w < -bary_eps {
                        continue;
                    }
                    // crossing very close to an edge: parity unreliable
                    if u < bary_eps || v < bary_eps || w < bary_eps {
                        return None;
                    }
                    let thit = vec3::dot(e2, q) * inv;
                    if thit > t_min {
                        hits.push((thit, t));
                    }
                }
            } else {
                stack.push(node.a);
                stack.push(node.b);
            }
        }
        hits.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        Some(hits)
    }

    /// Closest surface point: (squared distance, triangle, point, barycentric).
    pub fn closest_point(
        &self,
        mesh: &TriMesh<T>,
        p: Vec3<T>,
    ) -> (T, u32, Vec3<T>, [T; 3]) {
        let mut best_d2 = T::infinity();
        let mut best = (0u32, p, [T::zero(); 3]);
        // depth-first with branch-and-bound on node distance
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.dist2(p) >= best_d2 {
                continue;
            }
            if node.leaf {
                for &t in &self.order[node.a as usize..(node.a + node.b) as usize] {
                    let tri = mesh.tri_vertices(t as usize);
                    let (q, bary) = closest_point_on_triangle(p, tri);
                    let d2 = vec3::dot(vec3::sub(p, q), vec3::sub(p, q));
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = (t, q, bary);
                    }
                }
            } else {
                // visit nearer child first
                let (l, r) = (node.a, node.b);
                let dl = self.nodes[l as usize].bounds.dist2(p);
                let dr = self.nodes[r as usize].bounds.dist2(p);
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        (best_d2, best.0, best.1, best.2)
    }
}

/// Closest point on a triangle and its barycentric coordinates
/// (w.r.t. vertices a, b, c).
pub fn closest_point_on_triangle<T: Scalar>(p: Vec3<T>, tri: [Vec3<T>; 3]) -> (Vec3<T>, [T; 3]) {
    let [a, b, c] = tri;
    let ab = vec3::sub(b, a);
    let ac = vec3::sub(c, a);
    let ap = vec3::sub(p, a);
    let d1 = vec3::dot(ab, ap);
    let d2 = vec3::dot(ac, ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return (a, [T::one(), T::zero(), T::zero()]);
    }
    let bp = vec3::sub(p, b);
    let d3 = vec3::dot(ab, bp);
    let d4 = vec3::dot(ac, bp);
    if d3 >= T::zero() && d4 <= d3 {
        return (b, [T::zero(), T::one(), T::zero()]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return (
            vec3::add(a, vec3::scale(ab, v)),
            [T::one() - v, v, T::zero()],
        );
    }
    let cp = vec3::sub(p, c);
    let d5 = vec3::dot(ab, cp);
    let d6 = vec3::dot(ac, cp);
    if d6 >= T::zero() && d5 <= d6 {
        return (c, [T::zero(), T::zero(), T::one()]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return (
            vec3::add(a, vec3::scale(ac, w)),
            [T::one() - w, T::zero(), w],
        );
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        let q = vec3::add(b, vec3::scale(vec3::sub(c, b), w));
        return (q, [T::zero(), T::one() - w, w]);
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let q = vec3::add(vec3::add(a, vec3::scale(ab, v)), vec3::scale(ac, w));
    (q, [T::one() - v - w, v, w])
}
