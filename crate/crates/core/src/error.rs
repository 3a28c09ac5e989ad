use thiserror::Error;

/// Errors raised by the numerical kernels and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("smallest eigenvalue {lambda1:.3e} is negative; increase the shift c0")]
    NonPositiveSpectrum { lambda1: f64 },

    #[error("no convergence at node {node} (t = {t:.6}): residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        node: usize,
        t: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("amplitude escape at node {node} (t = {t:.6}): |u| = {amplitude:.4e} exceeds working box m = {bound:.4e}")]
    AmplitudeEscape {
        node: usize,
        t: f64,
        amplitude: f64,
        bound: f64,
    },

    #[error("monotonicity violated at sweep {sweep}, time node {node}, space node {point}: excess {excess:.3e} (M too small or invalid bracket)")]
    MonotonicityViolation {
        sweep: usize,
        node: usize,
        point: usize,
        excess: f64,
    },

    #[error("increments grew over {sweeps} consecutive sweeps (last {last:.3e})")]
    Divergence { sweeps: usize, last: f64 },

    #[error("Newton iteration diverged: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence { residual: f64, iterations: usize },

    #[error("singular linear system at row {row}")]
    Singular { row: usize },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
