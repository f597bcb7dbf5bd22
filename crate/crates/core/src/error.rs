use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-power-of-two {what}: {value}")]
    NonPowerOfTwo { what: &'static str, value: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("overlap: {0}")]
    Overlap(String),
    #[error("empty mask: {0}")]
    EmptyMask(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("unsupported schema {0:?}")]
    UnsupportedSchema(String),
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("ellipticity violation: {0}")]
    Ellipticity(String),
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("requires the identity metric: {0}")]
    NonIdentityMetric(&'static str),
    #[error("support violation: {0}")]
    Support(String),
    #[error("Dirichlet eigenvalue: relative singular-value margin {margin:.3e} below 1e-10")]
    DirichletEigenvalue { margin: f64 },
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("solver failure in column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("divergent moment: {0}")]
    Divergent(String),
    #[error("resonant exponents {0}; see resonant_counterexample for the explicit cancelling pair")]
    Resonant(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerical solve itself, as opposed to bad input.
    pub fn is_solver(&self) -> bool {
        match self {
            Error::DirichletEigenvalue { .. }
            | Error::NonConvergence(_)
            | Error::Eigensolver(_)
            | Error::IllConditioned(_)
            | Error::Divergent(_) => true,
            Error::Column { source, .. } => source.is_solver(),
            _ => false,
        }
    }
}
