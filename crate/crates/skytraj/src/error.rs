use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("track {track_id}: {message}")]
    InvalidTrajectory { track_id: u64, message: String },

    #[error("unit mismatch: expected {expected}, got {got}")]
    UnitMismatch { expected: &'static str, got: &'static str },

    #[error("no observations")]
    NoObservations,

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("track {track_id} has a gap before frame {frame}; interpolate before smoothing")]
    GapNotInterpolated { track_id: u64, frame: i64 },

    #[error("empty window: no states in [{t0}, {t1}]")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("tracks {a} and {b} share no time window")]
    NoSharedWindow { a: u64, b: u64 },

    #[error("track {track_id} has no velocity estimates; smooth before filtering")]
    VelocitiesMissing { track_id: u64 },

    #[error("latitude {lat} outside transverse-Mercator domain (|lat| must be < 84 deg)")]
    PolarRegion { lat: f64 },

    #[error("camera model: {0}")]
    Camera(String),

    #[error("insufficient constraints: {got} ruler pairs, need at least {need}")]
    InsufficientConstraints { got: usize, need: usize },

    #[error("undistortion diverged for pixel ({x}, {y})")]
    UndistortDiverged { x: f64, y: f64 },

    #[error("need at least 4 ground control points, got {0}")]
    TooFewGcps(usize),

    #[error("degenerate ground control configuration (collinear or coincident points)")]
    DegenerateGcps,

    #[error("homography is not invertible")]
    SingularHomography,

    #[error("map geometry: {0}")]
    MapGeometry(String),

    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: {message}")]
    InvalidFile { path: PathBuf, message: String },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("unknown movement `{0}`")]
    UnknownMovement(String),

    #[error("signal timeline has no interval covering t = {t} s for movement `{movement}`")]
    SignalGap { t: f64, movement: String },

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` requires `{path}`; run the earlier stages first")]
    MissingArtifact { stage: &'static str, path: PathBuf },

    #[error("strict mode: stage `{stage}` produced {n} warning(s); first: {first}")]
    Strict { stage: &'static str, n: usize, first: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
