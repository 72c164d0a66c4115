//! End-to-end trainable implicit-surface reconstruction engine.
//!
//! Given a single RGB image, a pixel-aligned signed-distance + albedo field
//! is trained with sparse 3D losses and patch rendering losses, rendered by
//! differentiable sphere tracing, and meshed by octree marching cubes. A
//! procedural scene generator provides ground truth for training and
//! evaluation.
//!
//! All numeric modules are generic over [`scalar::Scalar`]; production code
//! uses [`Real`] (`f32`), while test oracles instantiate `f64`.

pub mod datagen;
pub mod error;
pub mod field;
pub mod geom;
pub mod graph;
pub mod img;
pub mod mesher;
pub mod nets;
pub mod raycast;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::TensorData;

/// Production scalar type.
pub type Real = f32;
/// Scalar type used by numeric test oracles.
pub type Oracle = f64;
