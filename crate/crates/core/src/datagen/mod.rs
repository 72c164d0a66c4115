//! Synthetic dataset generation: procedural scenes, ground-truth renders,
//! sample emission, and on-disk records.

pub mod sdf;

pub use sdf::{AlbedoPattern, Primitive, SceneSdf};
