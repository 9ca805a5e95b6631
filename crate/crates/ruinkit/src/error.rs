use std::fmt;

/// Unified error type for the whole crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A distribution or model parameter is outside its legal range.
    InvalidParameter(String),
    /// The requested evaluation point is outside the mathematical domain.
    Domain(String),
    /// A tail estimate would rest on fewer exceedances than the floor allows.
    InsufficientTailData {
        x: f64,
        exceedances: u64,
        required: u64,
    },
    /// Input data cannot support the computation (empty, constant, ties).
    DegenerateInput(String),
    /// Diagnostics point at two different tail classes at once.
    AmbiguousClassification { first: String, second: String },
    /// A requested expectation does not converge under the given law.
    DivergentMoment(String),
    /// A configuration is structurally invalid (grids, barriers, partitions).
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InsufficientTailData {
                x,
                exceedances,
                required,
            } => write!(
                f,
                "insufficient tail data at x = {x}: {exceedances} exceedances, need {required}"
            ),
            Error::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            Error::AmbiguousClassification { first, second } => {
                write!(f, "ambiguous tail classification: {first} vs {second}")
            }
            Error::DivergentMoment(msg) => write!(f, "divergent moment: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
