use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant onto an exit status.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    /// An exact computation was requested without the capability it needs
    /// (typically a declared almost-sure bound on the alpha marks).
    #[error("missing capability: {0}")]
    Capability(String),

    #[error(
        "depth exhausted at epoch {epoch}: cumulative interarrival {cumulative} \
         did not reach alpha_bound {bound} within {max_depth} lags"
    )]
    DepthExhausted {
        epoch: i64,
        cumulative: f64,
        bound: f64,
        max_depth: usize,
    },

    #[error("renovation not found: no certified zero epoch among the first {max_epochs} past epochs")]
    RenovationNotFound { max_epochs: usize },

    #[error("oracle truncation insufficient: tail mass {tail_mass:e} above 1e-12 at level {level}")]
    OracleTruncation { level: usize, tail_mass: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
