//! Small fixed-size vector helpers over `[T; 3]`.

use crate::scalar::Scalar;

pub type Vec3<T> = [T; 3];

pub fn add<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale<T: Scalar>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm<T: Scalar>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

pub fn normalize<T: Scalar>(a: Vec3<T>) -> Vec3<T> {
    let n = norm(a);
    if n > T::zero() {
        scale(a, T::one() / n)
    } else {
        a
    }
}

pub fn dist<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm(sub(a, b))
}

pub fn lerp<T: Scalar>(a: Vec3<T>, b: Vec3<T>, t: T) -> Vec3<T> {
    add(scale(a, T::one() - t), scale(b, t))
}

pub fn cast<T: Scalar, U: Scalar>(a: Vec3<T>) -> Vec3<U> {
    [
        U::c(a[0].to_f64_lossy()),
        U::c(a[1].to_f64_lossy()),
        U::c(a[2].to_f64_lossy()),
    ]
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: [T::infinity(); 3],
            max: [T::neg_infinity(); 3],
        }
    }

    pub fn grow(&mut self, p: Vec3<T>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn merge(&mut self, other: &Aabb<T>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(other.min[k]);
            self.max[k] = self.max[k].max(other.max[k]);
        }
    }

    pub fn center(&self) -> Vec3<T> {
        scale(add(self.min, self.max), T::c(0.5))
    }

    pub fn extent(&self) -> Vec3<T> {
        sub(self.max, self.min)
    }

    pub fn diagonal(&self) -> T {
        norm(self.extent())
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn padded(&self, frac: T) -> Self {
        let e = scale(self.extent(), frac);
        Self {
            min: sub(self.min, e),
            max: add(self.max, e),
        }
    }

    /// Entry/exit parameters of a ray against the box, if it intersects.
    pub fn ray_range(&self, o: Vec3<T>, d: Vec3<T>) -> Option<(T, T)> {
        let mut t0 = T::neg_infinity();
        let mut t1 = T::infinity();
        for k in 0..3 {
            if d[k].abs() < T::c(1e-18) {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return None;
                }
            } else {
                let inv = T::one() / d[k];
                let mut a = (self.min[k] - o[k]) * inv;
                let mut b = (self.max[k] - o[k]) * inv;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
            }
        }
        if t0 <= t1 {
            Some((t0, t1))
        } else {
            None
        }
    }

    /// Squared distance from a point to the box (zero inside).
    pub fn dist2(&self, p: Vec3<T>) -> T {
        let mut d2 = T::zero();
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                T::zero()
            };
            d2 += v * v;
        }
        d2
    }
}
