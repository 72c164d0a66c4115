//! Analytic signed-distance scenes: primitives, smooth blending, and
//! procedural per-primitive albedo.

use crate::field::{DistanceField, SurfaceField};
use crate::geom::vec3::{self, Aabb, Vec3};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    RoundedBox {
        center: [f64; 3],
        half: [f64; 3],
        round: f64,
    },
    Torus {
        center: [f64; 3],
        major: f64,
        minor: f64,
    },
}

impl Primitive {
    pub fn distance<T: Scalar>(&self, p: Vec3<T>) -> T {
        match *self {
            Primitive::Sphere { center, radius } => {
                vec3::dist(p, vec3::cast(center)) - T::c(radius)
            }
            Primitive::Capsule { a, b, radius } => {
                let a: Vec3<T> = vec3::cast(a);
                let b: Vec3<T> = vec3::cast(b);
                let pa = vec3::sub(p, a);
                let ba = vec3::sub(b, a);
                let h = (vec3::dot(pa, ba) / vec3::dot(ba, ba))
                    .max(T::zero())
                    .min(T::one());
                vec3::norm(vec3::sub(pa, vec3::scale(ba, h))) - T::c(radius)
            }
            Primitive::RoundedBox {
                center,
                half,
                round,
            } => {
                let c: Vec3<T> = vec3::cast(center);
                let h: Vec3<T> = vec3::cast(half);
                let q = [
                    (p[0] - c[0]).abs() - h[0],
                    (p[1] - c[1]).abs() - h[1],
                    (p[2] - c[2]).abs() - h[2],
                ];
                let outside = vec3::norm([
                    q[0].max(T::zero()),
                    q[1].max(T::zero()),
                    q[2].max(T::zero()),
                ]);
                let inside = q[0].max(q[1]).max(q[2]).min(T::zero());
                outside + inside - T::c(round)
            }
            Primitive::Torus {
                center,
                major,
                minor,
            } => {
                let c: Vec3<T> = vec3::cast(center);
                let q = vec3::sub(p, c);
                let ring = (q[0] * q[0] + q[2] * q[2]).sqrt() - T::c(major);
                (ring * ring + q[1] * q[1]).sqrt() - T::c(minor)
            }
        }
    }

    pub fn bounds(&self) -> Aabb<f64> {
        match *self {
            Primitive::Sphere { center, radius } => Aabb::new(
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Primitive::Capsule { a, b, radius } => {
                let mut bb = Aabb::empty();
                for p in [a, b] {
                    bb.grow([p[0] - radius, p[1] - radius, p[2] - radius]);
                    bb.grow([p[0] + radius, p[1] + radius, p[2] + radius]);
                }
                bb
            }
            Primitive::RoundedBox {
                center,
                half,
                round,
            } => Aabb::new(
                [
                    center[0] - half[0] - round,
                    center[1] - half[1] - round,
                    center[2] - half[2] - round,
                ],
                [
                    center[0] + half[0] + round,
                    center[1] + half[1] + round,
                    center[2] + half[2] + round,
                ],
            ),
            Primitive::Torus {
                center,
                major,
                minor,
            } => {
                let r = major + minor;
                Aabb::new(
                    [center[0] - r, center[1] - minor, center[2] - r],
                    [center[0] + r, center[1] + minor, center[2] + r],
                )
            }
        }
    }
}

/// Polynomial smooth minimum; k = 0 degenerates to a hard minimum.
pub fn smooth_union<T: Scalar>(d1: T, d2: T, k: T) -> T {
    if k <= T::zero() {
        return d1.min(d2);
    }
    let h = (T::c(0.5) + T::c(0.5) * (d2 - d1) / k).max(T::zero()).min(T::one());
    // lerp(d2, d1, h) - k h (1 - h)
    d2 * (T::one() - h) + d1 * h - k * h * (T::one() - h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlbedoPattern {
    Solid {
        color: [f64; 3],
    },
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        scale: f64,
    },
    Stripes {
        a: [f64; 3],
        b: [f64; 3],
        axis: usize,
        freq: f64,
    },
    /// Hash-based value noise blended between two colors.
    Noise {
        a: [f64; 3],
        b: [f64; 3],
        scale: f64,
        seed: u32,
    },
}

fn hash3(ix: i64, iy: i64, iz: i64, seed: u32) -> f64 {
    let mut h = (ix as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add((iz as u64).wrapping_mul(0x1656_67B1_9E37_79F9))
        .wrapping_add(seed as u64);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h & 0xFFFF_FFFF) as f64 / 4294967295.0
}

impl AlbedoPattern {
    pub fn albedo<T: Scalar>(&self, p: Vec3<T>) -> Vec3<T> {
        match *self {
            AlbedoPattern::Solid { color } => vec3::cast(color),
            AlbedoPattern::Checker { a, b, scale } => {
                let s = 1.0 / scale;
                let q = [
                    (p[0].to_f64_lossy() * s).floor() as i64,
                    (p[1].to_f64_lossy() * s).floor() as i64,
                    (p[2].to_f64_lossy() * s).floor() as i64,
                ];
                if (q[0] + q[1] + q[2]).rem_euclid(2) == 0 {
                    vec3::cast(a)
                } else {
                    vec3::cast(b)
                }
            }
            AlbedoPattern::Stripes { a, b, axis, freq } => {
                let v = (p[axis.min(2)].to_f64_lossy() * freq * std::f64::consts::PI).sin();
                let t = 0.5 + 0.5 * v;
                let mix = |x: f64, y: f64| T::c(x * (1.0 - t) + y * t);
                [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
            }
            AlbedoPattern::Noise { a, b, scale, seed } => {
                let s = 1.0 / scale;
                let t = hash3(
                    (p[0].to_f64_lossy() * s).floor() as i64,
                    (p[1].to_f64_lossy() * s).floor() as i64,
                    (p[2].to_f64_lossy() * s).floor() as i64,
                    seed,
                );
                let mix = |x: f64, y: f64| T::c(x * (1.0 - t) + y * t);
                [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
            }
        }
    }
}

/// A blended composition of primitives with procedural albedo, usable as
/// an exact-enough signed distance field.
#[derive(Debug, Clone)]
pub struct SceneSdf {
    pub prims: Vec<(Primitive, AlbedoPattern)>,
    /// Smooth-union blend radius (0 = hard union).
    pub blend: f64,
}

impl SceneSdf {
    pub fn distance_at<T: Scalar>(&self, p: Vec3<T>) -> T {
        let mut d = T::infinity();
        for (prim, _) in &self.prims {
            d = smooth_union(prim.distance(p), d, T::c(self.blend));
        }
        d
    }

    /// Albedo of the closest primitive.
    pub fn albedo_at<T: Scalar>(&self, p: Vec3<T>) -> Vec3<T> {
        let mut best = T::infinity();
        let mut alb = [T::c(0.7); 3];
        for (prim, pat) in &self.prims {
            let d = prim.distance(p);
            if d < best {
                best = d;
                alb = pat.albedo(p);
            }
        }
        alb
    }

    /// Central-difference gradient of the distance.
    pub fn gradient_at<T: Scalar>(&self, p: Vec3<T>) -> Vec3<T> {
        let h = T::c(1e-4);
        let mut g = [T::zero(); 3];
        for k in 0..3 {
            let mut pp = p;
            pp[k] += h;
            let mut pm = p;
            pm[k] -= h;
            g[k] = (self.distance_at(pp) - self.distance_at(pm)) / (h + h);
        }
        g
    }

    pub fn bounds(&self) -> Aabb<f64> {
        let mut bb = Aabb::empty();
        for (prim, _) in &self.prims {
            bb.merge(&prim.bounds());
        }
        // blending can bulge the union outward slightly
        bb.padded(self.blend.max(0.0) * 0.5 + 1e-3)
    }
}

impl<T: Scalar> DistanceField<T> for SceneSdf {
    fn distance_batch(&self, pts: &[Vec3<T>]) -> Vec<T> {
        pts.iter().map(|&p| self.distance_at(p)).collect()
    }
}

impl<T: Scalar> SurfaceField<T> for SceneSdf {
    fn albedo_batch(&self, pts: &[Vec3<T>]) -> Vec<T> {
        let mut out = Vec::with_capacity(pts.len() * 3);
        for &p in pts {
            out.extend(self.albedo_at(p));
        }
        out
    }

    fn normal_batch(&self, pts: &[Vec3<T>]) -> Vec<Vec3<T>> {
        pts.iter().map(|&p| self.gradient_at(p)).collect()
    }
}

pub fn unit_sphere_scene() -> SceneSdf {
    SceneSdf {
        prims: vec![(
            Primitive::Sphere {
                center: [0.0; 3],
                radius: 1.0,
            },
            AlbedoPattern::Solid {
                color: [0.7, 0.7, 0.7],
            },
        )],
        blend: 0.0,
    }
}
