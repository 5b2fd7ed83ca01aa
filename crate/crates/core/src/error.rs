use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// The Mittag-Leffler series could not be summed in double precision.
    SeriesDivergence { alpha: f64, z: f64, terms: usize },
    /// A time mesh or space grid violates its construction rules.
    InvalidMesh(&'static str),
    /// A step index is outside `1..=len`.
    IndexOutOfRange { index: usize, len: usize },
    /// Two inputs that must agree in length do not.
    ShapeMismatch { expected: usize, found: usize },
    /// Thomas elimination met a vanishing pivot.
    ZeroPivot { row: usize },
    /// A kernel row has a nonpositive leading coefficient.
    CorruptKernel { n: usize },
    /// The operation needs an exact solution the problem does not carry.
    MissingExact,
    /// Supplied data fail a consistency check.
    Inconsistent { what: &'static str, deviation: f64 },
    /// Step counts of a convergence study are not successive doublings.
    NotDoubling { index: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "domain error: {what} (got {value})"),
            Error::SeriesDivergence { alpha, z, terms } => write!(
                f,
                "Mittag-Leffler series E_{alpha}({z}) did not converge within {terms} terms"
            ),
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "step index {index} outside 1..={len}")
            }
            Error::ShapeMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::ZeroPivot { row } => write!(
                f,
                "zero pivot in tridiagonal solve at row {row}; the step-size restriction is probably violated"
            ),
            Error::CorruptKernel { n } => {
                write!(f, "kernel row {n} has a nonpositive leading coefficient")
            }
            Error::MissingExact => write!(f, "problem has no exact solution"),
            Error::Inconsistent { what, deviation } => {
                write!(f, "inconsistent data: {what} (deviation {deviation:e})")
            }
            Error::NotDoubling { index } => {
                write!(f, "step counts do not double at position {index}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
