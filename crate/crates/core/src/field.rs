//! Field abstractions: anything queryable for signed distance, and richer
//! surfaces that also carry albedo and normals. Implemented by the neural
//! field and by analytic procedural scenes.

use crate::geom::vec3::Vec3;
use crate::scalar::Scalar;

pub trait DistanceField<T: Scalar>: Sync {
    fn distance_batch(&self, pts: &[Vec3<T>]) -> Vec<T>;

    fn distance(&self, p: Vec3<T>) -> T {
        self.distance_batch(&[p])[0]
    }
}

pub trait SurfaceField<T: Scalar>: DistanceField<T> {
    /// Flat `[n*3]` albedo at the given points.
    fn albedo_batch(&self, pts: &[Vec3<T>]) -> Vec<T>;
    /// Field gradient (not necessarily unit length).
    fn normal_batch(&self, pts: &[Vec3<T>]) -> Vec<Vec3<T>>;
}

impl<'a, T: Scalar> DistanceField<T> for crate::nets::eval::NeuralField<'a, T> {
    fn distance_batch(&self, pts: &[Vec3<T>]) -> Vec<T> {
        crate::nets::eval::NeuralField::distance_batch(self, pts)
    }
}

impl<'a, T: Scalar> SurfaceField<T> for crate::nets::eval::NeuralField<'a, T> {
    fn albedo_batch(&self, pts: &[Vec3<T>]) -> Vec<T> {
        self.eval_batch(pts).1
    }

    fn normal_batch(&self, pts: &[Vec3<T>]) -> Vec<Vec3<T>> {
        crate::nets::eval::NeuralField::normal_batch(self, pts)
    }
}

/// Counts queries going through it; used to assert batching economy.
pub struct CountingField<'a, T: Scalar, F: DistanceField<T>> {
    pub inner: &'a F,
    count: std::sync::atomic::AtomicUsize,
    _t: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, F: DistanceField<T>> CountingField<'a, T, F> {
    pub fn new(inner: &'a F) -> Self {
        Self {
            inner,
            count: std::sync::atomic::AtomicUsize::new(0),
            _t: std::marker::PhantomData,
        }
    }

    pub fn queries(&self) -> usize {
        self.count.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl<'a, T: Scalar, F: DistanceField<T>> DistanceField<T> for CountingField<'a, T, F> {
    fn distance_batch(&self, pts: &[Vec3<T>]) -> Vec<T> {
        self.count
            .fetch_add(pts.len(), std::sync::atomic::Ordering::Relaxed);
        self.inner.distance_batch(pts)
    }
}
