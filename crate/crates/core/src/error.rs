use thiserror::Error;

/// Errors raised by the surrogate, optimizer and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, length, range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    /// The surrogate returned NaN or infinity for some individual.
    #[error("surrogate returned a non-finite value at generation {generation}, individual {index}")]
    NonFiniteSurrogate { generation: usize, index: usize },

    /// A statistical test cannot be run on the supplied data.
    #[error("statistical test not applicable: {0}")]
    Stats(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Shorthand for building a [`Error::Contract`] with `format!` arguments.
macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(format!($($arg)*))
    };
}
pub(crate) use contract;
