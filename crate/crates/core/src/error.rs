use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the evaluable region")]
    OutOfDomain { x: f64, y: f64 },
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("invalid function spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate family: {0}")]
    DegenerateFamily(String),
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("degenerate chord: endpoints coincide")]
    DegenerateChord,
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("matrix is not orthogonal (deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("coverage {coverage:.3} below required {required:.3}")]
    CoverageTooLow { coverage: f64, required: f64 },
    #[error("cannot normalize: f(0, 0) = 0")]
    NormalizationImpossible,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
