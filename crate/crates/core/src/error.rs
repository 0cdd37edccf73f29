use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfUnitRange { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    ShapeMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("{count} coefficients exceed the model's {components} components")]
    TooManyCoefficients { count: usize, components: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid skinning weights: {0}")]
    InvalidWeights(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("quaternion for joint {joint} is not unit length (norm {norm})")]
    NonUnitQuaternion { joint: usize, norm: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("bounding-box statistics are empty")]
    EmptyStats,
    #[error("degenerate bounding box")]
    DegenerateBox,
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("texture has {texture} faces but mesh has {mesh}")]
    TextureFaceMismatch { texture: usize, mesh: usize },
    #[error("render stayed empty after {0} attempts")]
    EmptyRender(usize),
    #[error("asset error: {0}")]
    Asset(String),
}

pub type Result<T> = core::result::Result<T, Error>;
