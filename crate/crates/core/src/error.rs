use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrid(String),

    #[error("point ({x}, {y}) lies outside the grid bounds")]
    OutOfDomain { x: f64, y: f64 },

    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("kernel evaluated at zero distance; use the self-cell weight")]
    Singularity,

    #[error("scatterer support leaks into the absorbing layer at node ({i}, {j})")]
    SupportViolation { i: usize, j: usize },

    #[error("shape outside the admissible support box: {0}")]
    ShapeOutOfBounds(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("linear solver failure: {message} (pivot ratio {pivot_ratio:.3e})")]
    SolverFailure { message: String, pivot_ratio: f64 },

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line search failed at the starting point after {trials} trials")]
    DegenerateStart { trials: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable category, used by the command line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) | Error::IncompatibleGrid(_) => "grid",
            Error::OutOfDomain { .. } | Error::Domain { .. } | Error::Singularity => "domain",
            Error::SupportViolation { .. } | Error::ShapeOutOfBounds(_) => "support",
            Error::Degenerate(_) | Error::DegenerateStart { .. } => "degenerate",
            Error::SolverFailure { .. } => "solver",
            Error::Layout(_) | Error::Config(_) => "validation",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
