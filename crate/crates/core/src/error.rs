use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A linear system could not be solved reliably.
    #[error("singular {what} (condition number {condition:.3e})")]
    Singular { what: String, condition: f64 },

    #[error("degenerate weights at iteration {iteration}: every weight is at the floor")]
    DegenerateWeights { iteration: usize },

    #[error("{source} (iteration {iteration})")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("tuning parameter q = {0} is outside (0, 1]")]
    InvalidQ(f64),

    #[error("AR coefficients {0:?} are not stationary")]
    NonStationary(Vec<f64>),

    #[error("no grid point produced a usable fit ({failures} failures)")]
    NoValidQ { failures: usize },

    #[error("inference unavailable: Jacobian is singular (condition number {condition:.3e})")]
    InferenceUnavailable { condition: f64 },

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration field '{field}': {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        match self {
            Error::DegenerateWeights { .. } | Error::AtIteration { .. } => self,
            other => Error::AtIteration {
                iteration,
                source: Box::new(other),
            },
        }
    }

    /// True for failures rooted in an ill-conditioned or degenerate numerical state.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. }
            | Error::DegenerateWeights { .. }
            | Error::InferenceUnavailable { .. } => true,
            Error::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
