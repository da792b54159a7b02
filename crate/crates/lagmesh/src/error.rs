use thiserror::Error;

/// Errors produced by geometry, kernel, solver, norm and study operations.
#[derive(Error, Debug)]
pub enum Error {
    #[error("domain indicator rejects all probe points (empty domain)")]
    EmptyDomain,

    #[error("degenerate separation: a point set with fewer than 2 points has no separation radius")]
    DegenerateSeparation,

    #[error("extension requires h < 1, got h = {0}")]
    ExtensionRequiresSmallH(f64),

    #[error("Bessel K domain error: r must be > 0, got {0}")]
    BesselDomain(f64),

    #[error("unsupported Bessel order nu = {0}; only nonnegative integers and half-integers are supported")]
    UnsupportedOrder(f64),

    #[error("kernel derivative singularity: |alpha| = {order} at a kernel center (2m - d = {threshold})")]
    KernelDerivativeSingularity { order: usize, threshold: i64 },

    #[error("non-unisolvent point set: Gram matrix is numerically rank-deficient")]
    NonUnisolvent,

    #[error("degenerate footprint: no positive eigenvalue above threshold")]
    DegenerateFootprint,

    #[error("singular collocation system: factorization failed")]
    SingularSystem,

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config semantic error ({key}): {message}")]
    ConfigSemantic { key: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear algebra backend error: {0}")]
    Linalg(String),

    #[error("quadrature too coarse: resolution {resolution} exceeds q/3 = {limit}")]
    QuadratureTooCoarse { resolution: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
