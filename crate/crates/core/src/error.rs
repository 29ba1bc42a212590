use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample {index} is not finite ({value})")]
    NonFiniteSample { index: usize, value: f64 },

    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("both mixture components have zero density at sample {index} (y = {value})")]
    DegenerateDensity { index: usize, value: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fits were computed on different data (expected hash {expected}, got {actual})")]
    MismatchedData { expected: String, actual: String },

    #[error("{}:{}: {message}", path.display(), line.map(|l| l.to_string()).unwrap_or_else(|| "?".into()))]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("{}: expected {expected} columns, found {actual} on line {line}", path.display())]
    ShapeMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{}: window [{start}, {end}) exceeds {rows} rows", path.display())]
    WindowOutOfRange {
        path: PathBuf,
        start: usize,
        end: usize,
        rows: usize,
    },

    #[error("duplicate manifest key (subject={subject}, activity={activity}, trial={trial})")]
    DuplicateKey {
        subject: String,
        activity: String,
        trial: String,
    },

    #[error("manifest error: {0}")]
    Manifest(Box<Error>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 2 | unreadable or unparsable input, invalid argument |
    /// | 3 | degenerate input (too few samples, zero spread, mismatched data) |
    /// | 4 | convergence failure or degenerate density |
    /// | 5 | manifest error |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::ShapeMismatch { .. }
            | Error::WindowOutOfRange { .. }
            | Error::NonFiniteSample { .. }
            | Error::InvalidParameter(_)
            | Error::Io { .. } => 2,
            Error::TooFewSamples { .. }
            | Error::DegenerateInput(_)
            | Error::EmptyInput(_)
            | Error::MismatchedData { .. } => 3,
            Error::NoConvergence { .. } | Error::DegenerateDensity { .. } => 4,
            Error::Manifest(_) | Error::DuplicateKey { .. } => 5,
        }
    }
}

pub(crate) fn check_finite(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteSample {
            index,
            value: y[index],
        }),
        None => Ok(()),
    }
}
