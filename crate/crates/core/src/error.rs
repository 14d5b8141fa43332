use thiserror::Error;

/// Errors raised by the solver library.
///
/// Numerical non-convergence is kept distinct from malformed input so the
/// CLI can map the two onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("window has {got} entries, expected {expected}")]
    WindowSize { expected: usize, got: usize },

    #[error("mismatched domains: {0}")]
    MismatchedDomains(String),

    #[error("configurations are not ordered: {0}")]
    NotOrdered(String),

    #[error("no transition: {0}")]
    NoTransition(String),

    #[error("no gap pair (foliation)")]
    Foliation,

    #[error("no gap pair: {0}")]
    NoGap(String),

    #[error("missing lower-level data: {0}")]
    MissingLowerLevel(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("boundary deviation not shrinking ({0}); the pair is probably not adjacent")]
    BoundaryNotShrinking(String),

    #[error("tail failed to shrink: {0}")]
    TailNotShrinking(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_)
                | Error::BoundaryNotShrinking(_)
                | Error::TailNotShrinking(_)
                | Error::Foliation
                | Error::NoGap(_)
                | Error::NoTransition(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
