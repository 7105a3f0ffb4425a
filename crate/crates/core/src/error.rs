use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {got} is too small, need at least {min}")]
    DimensionTooSmall { min: usize, got: usize },

    /// The reflection direction is (numerically) zero.
    #[error("degenerate direction: norm {norm:e} is below tolerance")]
    DegenerateDirection { norm: f64 },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),

    #[error("directions are not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("both log densities are -inf")]
    BothLogDensitiesInfinite,

    #[error("stage-one acceptance probability is 1, no delayed-rejection step possible")]
    StageOneAccepted,

    #[error("log density is NaN at the evaluated point")]
    NaNLogDensity,

    #[error("initial position is outside the support (log density -inf)")]
    StartOutsideSupport,

    #[error("finite-difference stencil left the support")]
    StencilOutsideSupport,

    #[error("series is constant")]
    ConstantSeries,

    #[error("series too short: {len} < {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("series is empty")]
    EmptySeries,

    #[error("optimisation failed: {0}")]
    Optimization(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
