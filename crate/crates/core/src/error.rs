use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("the {backend} backend does not support {capability}")]
    Unsupported {
        backend: &'static str,
        capability: &'static str,
    },

    #[error("scheme {scheme} needs {capability}, which the {backend} backend does not provide")]
    CapabilityMismatch {
        scheme: &'static str,
        backend: &'static str,
        capability: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive diffusion coefficient {value} in direction {direction}")]
    NonPositiveDiffusion { direction: usize, value: f64 },

    #[error("Arnoldi did not converge in {iterations} iterations (last residual estimate {estimate:.3e})")]
    KrylovNoConvergence { iterations: usize, estimate: f64 },

    #[error("dense assembly refused: {unknowns} unknowns exceeds the limit of {limit}")]
    TooLarge { unknowns: usize, limit: usize },

    #[error("shifted system is singular")]
    Singular,

    #[error("the reaction term provides no derivative with respect to u")]
    MissingDerivative,

    #[error("{0} has no stable lambda in [0, 1]")]
    NoStableLambda(&'static str),

    #[error("every lambda in the scan blew up for {0}")]
    ScanFailed(&'static str),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
