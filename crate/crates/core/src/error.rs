use std::path::PathBuf;

use crate::se3::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frame mismatch: expected {expected:?}, got {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("joint {joint} value {value} outside limits [{lower}, {upper}]")]
    LimitViolation {
        joint: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("inverse kinematics did not converge after {iterations} iterations (position error {position_error:.3e} m, orientation error {orientation_error:.3e} rad)")]
    NoConvergence {
        iterations: usize,
        position_error: f64,
        orientation_error: f64,
    },

    #[error("tool calibration is rank deficient (rank {rank} < 3)")]
    RankDeficient { rank: usize },

    #[error("not enough observations: got {got}, need at least {need}")]
    TooFewObservations { got: usize, need: usize },

    #[error("point is behind the camera (depth {depth} m)")]
    BehindCamera { depth: f64 },

    #[error("back-projected rays are parallel")]
    DegenerateRays,

    #[error("camera frusta and workspace have no common volume")]
    EmptyIntersection,

    #[error("image size mismatch: {left:?} vs {right:?}")]
    SizeMismatch { left: (u32, u32), right: (u32, u32) },

    #[error("stereo rig is not fronto-parallel: {0}")]
    NonRectifiedRig(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("generation aborted after {attempts} attempts with {accepted} of {requested} samples accepted ({stats})")]
    AttemptCapReached {
        attempts: u64,
        accepted: usize,
        requested: usize,
        stats: Box<crate::sample::RejectionStats>,
    },

    #[error("sample index {index} out of range (dataset has {len} samples)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dataset format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
