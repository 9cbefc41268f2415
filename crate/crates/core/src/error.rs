use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("empty factor list")]
    EmptyFactors,

    #[error("empty signature")]
    EmptySignature,

    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("subsystem `{0}` has dimension 0")]
    ZeroDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("signature mismatch: [{left}] vs [{right}]")]
    SignatureMismatch { left: String, right: String },

    #[error("operator is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("empty keep set")]
    EmptyKeepSet,

    #[error("projection onto the requested exchange sector is the zero vector")]
    DegenerateProjection,

    #[error("grid too small: need at least {min} points, found {found}")]
    GridTooSmall { min: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operator supports overlap on `{0}`")]
    OverlappingSupports(String),

    #[error("not a bipartition of the signature: {0}")]
    InvalidPartition(String),

    #[error("locality assumption violated: {0}")]
    LocalityViolation(String),

    #[error("setting pair (theta_a = {theta_a}, theta_b = {theta_b}) missing from records")]
    MissingSettingPair { theta_a: f64, theta_b: f64 },

    #[error(
        "insufficient test rounds at (theta_a = {theta_a}, theta_b = {theta_b}): {found} < {required}"
    )]
    InsufficientData {
        theta_a: f64,
        theta_b: f64,
        found: usize,
        required: usize,
    },

    #[error("wave function vanishes at every grid point")]
    AllNodes,

    #[error("quantum potential requested at node index {0}")]
    NodeEvaluation(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
