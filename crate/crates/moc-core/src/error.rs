//! Error type shared by all modules in this crate.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by matrix construction, the loss primitives, file parsing,
/// and the optimization harness.
#[derive(Debug)]
pub enum Error {
    /// Non-finite or otherwise unusable numeric input.
    InvalidInput(String),
    /// A matrix that is required to be symmetric is not.
    NotSymmetric(String),
    /// Smallest eigenvalue fails the positive-definiteness threshold.
    NotPositiveDefinite { min_eigval: f64, threshold: f64 },
    /// Matrix exponential (or similar) would overflow in double precision.
    NumericOverflow(String),
    /// Two operands disagree in dimension.
    DimMismatch { expected: usize, got: usize, context: &'static str },
    /// Array shape is incompatible with the requested operation.
    ShapeError(String),
    /// Fewer samples than a statistic requires.
    InsufficientSamples { got: usize, need: usize },
    /// Noise-schedule coefficient out of its valid range.
    InvalidCoefficient(String),
    /// Negative ranking margin.
    InvalidMargin { delta: f64 },
    /// A raw embedding with zero norm cannot be normalized.
    DegenerateEmbedding { index: usize },
    /// Schedule queried outside [0, total_steps].
    InvalidStep { step: usize, total_steps: usize },
    /// Optimization produced a non-finite loss.
    Diverged { iteration: usize },
    /// Embedding file has no unique azimuth-0 anchor row.
    MissingReference(String),
    /// Malformed text input; `line` is 1-based.
    Parse { line: usize, message: String },
    /// Configuration failed validation; lists the offending keys.
    Config { keys: Vec<String>, message: String },
    Io(std::io::Error),
}

impl Error {
    /// Stable machine-readable kind, used verbatim in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NumericOverflow(_) => "NumericOverflow",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::ShapeError(_) => "ShapeError",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::InvalidCoefficient(_) => "InvalidCoefficient",
            Error::InvalidMargin { .. } => "InvalidMargin",
            Error::DegenerateEmbedding { .. } => "DegenerateEmbedding",
            Error::InvalidStep { .. } => "InvalidStep",
            Error::Diverged { .. } => "DivergedError",
            Error::MissingReference(_) => "MissingReference",
            Error::Parse { .. } => "ParseError",
            Error::Config { .. } => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NotSymmetric(msg) => write!(f, "matrix not symmetric: {msg}"),
            Error::NotPositiveDefinite { min_eigval, threshold } => write!(
                f,
                "matrix not positive definite: min eigenvalue {min_eigval:e} below threshold {threshold:e}"
            ),
            Error::NumericOverflow(msg) => write!(f, "numeric overflow: {msg}"),
            Error::DimMismatch { expected, got, context } => {
                write!(f, "dimension mismatch in {context}: expected {expected}, got {got}")
            }
            Error::ShapeError(msg) => write!(f, "shape error: {msg}"),
            Error::InsufficientSamples { got, need } => {
                write!(f, "insufficient samples: got {got}, need at least {need}")
            }
            Error::InvalidCoefficient(msg) => write!(f, "invalid coefficient: {msg}"),
            Error::InvalidMargin { delta } => write!(f, "margin must be non-negative, got {delta}"),
            Error::DegenerateEmbedding { index } => {
                write!(f, "embedding {index} has zero norm and cannot be normalized")
            }
            Error::InvalidStep { step, total_steps } => {
                write!(f, "step {step} outside schedule range [0, {total_steps}]")
            }
            Error::Diverged { iteration } => {
                write!(f, "optimization diverged (non-finite loss) at iteration {iteration}")
            }
            Error::MissingReference(msg) => write!(f, "missing reference view: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Config { keys, message } => {
                write!(f, "invalid config (keys: {}): {message}", keys.join(", "))
            }
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
