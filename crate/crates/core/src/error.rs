use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the library.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator support straddles the twist anchor at site {anchor}")]
    Straddle { anchor: usize },

    #[error("evaluation at a pole: {0}")]
    Pole(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("grid too coarse for branch tracking near lambda = {lambda}; refine the grid")]
    Refinement { lambda: f64 },

    #[error("sequence does not saturate: last increment {increment:e} exceeds {tolerance:e}")]
    NoSaturation { increment: f64, tolerance: f64 },

    #[error("generating function diverges: {0}")]
    Divergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this error: 2 for configuration problems, 3 for
    /// capacity problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Capacity(_) => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be finite, got {value}")))
    }
}
