use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("output node must be scalar, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("leaf `{0}` is not part of this graph")]
    UnknownLeaf(String),
    #[error("second-order path through op `{0}` is not supported")]
    UnsupportedAdjoint(&'static str),
    #[error("point at or behind the camera plane (z = {0})")]
    BehindCamera(f64),
    #[error("mesh is not watertight: {0} boundary or non-manifold edges")]
    NotWatertight(usize),
    #[error("mesh is empty or degenerate")]
    DegenerateMesh,
    #[error("no surface found: field has no sign change in the probed box")]
    EmptySurface,
    #[error("bad image size: {0}")]
    BadImageSize(String),
    #[error("patch contains only background pixels")]
    BackgroundPatch,
    #[error("empty sample set: {0}")]
    EmptySamples(&'static str),
    #[error("scene spec invalid: {0}")]
    BadScene(String),
    #[error("file format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
