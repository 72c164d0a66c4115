//! Geometry: meshes, cameras, positional encoding, sampling, labeling.

pub mod bilinear;
pub mod bvh;
pub mod camera;
pub mod encode;
pub mod mesh;
pub mod mesh_io;
pub mod sampling;
pub mod vec3;

pub use camera::{Camera, Ray};
pub use mesh::TriMesh;
pub use sampling::{FreeSample, NearSample, SampleCounts, SampleSet, SurfaceSample};
pub use vec3::{Aabb, Vec3};
