use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised while building, solving, or checking a scenario.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("node at time index {time_index} has no children (terminal)")]
    NoChildren { time_index: usize },

    #[error(
        "step size too coarse: market price of risk {mpr} times sqrt(h) = {scaled} must be < 1 ({location})"
    )]
    StepTooCoarse {
        mpr: f64,
        scaled: f64,
        location: String,
    },

    #[error("positivity violated: {quantity} = {value} at {location}")]
    Positivity {
        quantity: &'static str,
        value: f64,
        location: String,
    },

    #[error("resource guard: lattice would hold {requested} path-nodes, cap is {cap}")]
    ResourceGuard { requested: u128, cap: u128 },

    #[error("numerical range error: {0}")]
    NumericalRange(String),

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalRange(_) | Error::Bracket(_) | Error::NonConvergence { .. } => 3,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::NoChildren { .. } => "no-children",
            Error::StepTooCoarse { .. } => "step-too-coarse",
            Error::Positivity { .. } => "positivity",
            Error::ResourceGuard { .. } => "resource-guard",
            Error::NumericalRange(_) => "numerical-range",
            Error::Bracket(_) => "bracket",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Precondition(_) => "precondition",
            Error::Io(_) => "io",
        }
    }
}
