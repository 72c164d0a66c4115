//! Perspective camera: projection and ray generation.
//!
//! Camera space is x/y along pixel axes and +z forward (points with z > 0
//! are in front). Pixel coordinates are continuous, (0,0) at the first
//! pixel center, u along columns and v along rows.

use super::vec3::{self, Vec3};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Row-major 3x3 rotation, world -> camera.
pub type Rot3<T> = [[T; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera<T> {
    pub focal_px: T,
    /// Principal point (u, v) in pixels.
    pub center: [T; 2],
    /// Camera origin in world coordinates.
    pub position: Vec3<T>,
    /// World-to-camera rotation.
    pub orientation: Rot3<T>,
    /// (width, height) in pixels.
    pub image_size: (usize, usize),
}

pub fn rot_apply<T: Scalar>(r: &Rot3<T>, v: Vec3<T>) -> Vec3<T> {
    [
        vec3::dot(r[0], v),
        vec3::dot(r[1], v),
        vec3::dot(r[2], v),
    ]
}

pub fn rot_transpose_apply<T: Scalar>(r: &Rot3<T>, v: Vec3<T>) -> Vec3<T> {
    [
        r[0][0] * v[0] + r[1][0] * v[1] + r[2][0] * v[2],
        r[0][1] * v[0] + r[1][1] * v[1] + r[2][1] * v[2],
        r[0][2] * v[0] + r[1][2] * v[1] + r[2][2] * v[2],
    ]
}

impl<T: Scalar> Camera<T> {
    /// Camera at `eye` looking at `target`. The rotation is proper
    /// (det = +1); pixel v grows along the third row x first row cross
    /// direction, which for the canonical axis-aligned case is world +y.
    pub fn look_at(
        eye: Vec3<T>,
        target: Vec3<T>,
        up: Vec3<T>,
        focal_px: T,
        image_size: (usize, usize),
    ) -> Self {
        let fwd = vec3::normalize(vec3::sub(target, eye));
        let right = vec3::normalize(vec3::cross(up, fwd));
        let down = vec3::cross(fwd, right);
        let half = T::c(0.5);
        Self {
            focal_px,
            center: [
                (T::c(image_size.0 as f64) - T::one()) * half,
                (T::c(image_size.1 as f64) - T::one()) * half,
            ],
            position: eye,
            orientation: [right, down, fwd],
            image_size,
        }
    }

    /// Checks `focal_px > 0` and orthonormality of the orientation.
    pub fn validate(&self) -> Result<()> {
        if self.focal_px <= T::zero() {
            return Err(Error::Config("focal length must be positive".into()));
        }
        let r = &self.orientation;
        let tol = T::c(1e-6);
        for i in 0..3 {
            for j in 0..3 {
                let d = vec3::dot(r[i], r[j]);
                let want = if i == j { T::one() } else { T::zero() };
                if (d - want).abs() > tol {
                    return Err(Error::Config("orientation not orthonormal".into()));
                }
            }
        }
        Ok(())
    }

    /// World point to camera coordinates.
    pub fn to_camera(&self, x: Vec3<T>) -> Vec3<T> {
        rot_apply(&self.orientation, vec3::sub(x, self.position))
    }

    /// Continuous pixel coordinates of a world point.
    pub fn project(&self, x: Vec3<T>) -> Result<[T; 2]> {
        let xc = self.to_camera(x);
        if xc[2] <= T::c(1e-9) {
            return Err(Error::BehindCamera(xc[2].to_f64_lossy()));
        }
        Ok([
            self.focal_px * xc[0] / xc[2] + self.center[0],
            self.focal_px * xc[1] / xc[2] + self.center[1],
        ])
    }

    /// Ray through a (continuous) pixel: origin is the camera position,
    /// direction is unit length.
    pub fn generate_ray(&self, pixel: [T; 2]) -> Ray<T> {
        let dc = [
            (pixel[0] - self.center[0]) / self.focal_px,
            (pixel[1] - self.center[1]) / self.focal_px,
            T::one(),
        ];
        let dw = rot_transpose_apply(&self.orientation, dc);
        Ray {
            origin: self.position,
            dir: vec3::normalize(dw),
        }
    }

    pub fn generate_rays(&self, pixels: &[[T; 2]]) -> Vec<Ray<T>> {
        pixels.iter().map(|&p| self.generate_ray(p)).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Camera<U> {
        let r = &self.orientation;
        Camera {
            focal_px: U::c(self.focal_px.to_f64_lossy()),
            center: [
                U::c(self.center[0].to_f64_lossy()),
                U::c(self.center[1].to_f64_lossy()),
            ],
            position: vec3::cast(self.position),
            orientation: [vec3::cast(r[0]), vec3::cast(r[1]), vec3::cast(r[2])],
            image_size: self.image_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub dir: Vec3<T>,
}

impl<T: Scalar> Ray<T> {
    pub fn at(&self, t: T) -> Vec3<T> {
        vec3::add(self.origin, vec3::scale(self.dir, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_camera() -> Camera<f64> {
        Camera {
            focal_px: 500.0,
            center: [256.0, 256.0],
            position: [0.0, 0.0, 0.0],
            orientation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            image_size: (512, 512),
        }
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let cam = test_camera();
        for depth in [0.5, 1.0, 7.3] {
            let p = cam.project([0.0, 0.0, depth]).unwrap();
            assert!((p[0] - 256.0).abs() < 1e-12 && (p[1] - 256.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pinhole_offset() {
        let cam = test_camera();
        let p = cam.project([0.1, 0.0, 1.0]).unwrap();
        assert!((p[0] - 306.0).abs() < 1e-9);
        assert!((p[1] - 256.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_rejected() {
        let cam = test_camera();
        assert!(cam.project([0.0, 0.0, -1.0]).is_err());
        assert!(cam.project([0.1, 0.2, 0.0]).is_err());
    }

    #[test]
    fn principal_ray_is_optical_axis() {
        let cam = test_camera();
        let r = cam.generate_ray([256.0, 256.0]);
        assert!((r.dir[0]).abs() < 1e-12 && (r.dir[1]).abs() < 1e-12);
        assert!((r.dir[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rays_are_unit_and_roundtrip_with_project() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cam = Camera::look_at(
            [1.0, 2.0, -3.0],
            [0.2, -0.1, 0.4],
            [0.0, 1.0, 0.0],
            550.0,
            (512, 512),
        );
        cam.validate().unwrap();
        for _ in 0..200 {
            let px = [rng.gen_range(0.0f64..511.0), rng.gen_range(0.0f64..511.0)];
            let ray = cam.generate_ray(px);
            let n = vec3::norm(ray.dir);
            assert!((n - 1.0).abs() < 1e-6);
            let t = rng.gen_range(0.1..10.0);
            let back = cam.project(ray.at(t)).unwrap();
            assert!(
                (back[0] - px[0]).abs() < 1e-4 && (back[1] - px[1]).abs() < 1e-4,
                "roundtrip {px:?} -> {back:?}"
            );
        }
    }
}
