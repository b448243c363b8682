use thiserror::Error;

/// Errors raised by the solvers, the network and the processing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument values.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Array shapes do not agree with what an operation expects.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A density (or another divisor) vanished or went negative.
    #[error("non-positive density at cell {cell} (rho = {value})")]
    NonPositiveDensity { cell: usize, value: f64 },

    /// Pressure or temperature lost positivity.
    #[error("loss of realizability at cell {cell}: {quantity} = {value}")]
    Realizability {
        cell: usize,
        quantity: &'static str,
        value: f64,
    },

    /// A NaN or infinity appeared in a simulation state.
    #[error("non-finite state reached at t = {time}")]
    NonFinite { time: f64 },

    /// A simulation aborted before its end time.
    #[error("simulation aborted at t = {time}: {source}")]
    Aborted {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    /// Linear solve failure (singular or non-dominant system).
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Numerical failure with no better classification (diverging loss, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed or corrupted file.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Whether this error reports a numerical breakdown (as opposed to a
    /// configuration or I/O problem).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonPositiveDensity { .. }
            | Error::Realizability { .. }
            | Error::NonFinite { .. }
            | Error::LinearSolve(_)
            | Error::Numerical(_) => true,
            Error::Aborted { .. } => true,
            _ => false,
        }
    }

    /// Time reached before the failure, when known.
    pub fn time_reached(&self) -> Option<f64> {
        match self {
            Error::Aborted { time, .. } | Error::NonFinite { time } => Some(*time),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
