use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An eigenvalue falls outside the domain of the requested spectral function.
    #[error("domain error: eigenvalue {eigenvalue:e} is not admissible ({reason})")]
    Domain { eigenvalue: f64, reason: String },

    #[error("Jacobi eigen-solver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vech length {len} does not match dimension {dim} (expected {expected})")]
    LengthMismatch {
        len: usize,
        dim: usize,
        expected: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value in input")]
    NonFinite,

    /// Fitted covariance is singular or too ill-conditioned to evaluate a density.
    #[error("singular covariance (condition number {condition:e})")]
    SingularSigma { condition: f64 },

    #[error("no grid point produced a valid likelihood")]
    AllPointsFailed,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rejection sampling gave up after {attempts} attempts")]
    RejectionLimit { attempts: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("{count} tensor(s) are not positive semi-definite, lines {lines:?}")]
    NotPsd { count: usize, lines: Vec<u64> },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short stable label, used in status columns and machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::EmptyInput => "empty_input",
            Error::Degenerate(_) => "degenerate",
            Error::NonFinite => "non_finite",
            Error::SingularSigma { .. } => "singular_sigma",
            Error::AllPointsFailed => "all_points_failed",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::RejectionLimit { .. } => "rejection_limit",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::NotPsd { .. } => "not_psd",
            Error::Io(_) => "io",
        }
    }
}
