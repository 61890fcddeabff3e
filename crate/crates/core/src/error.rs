use thiserror::Error;

/// Errors raised by the PerPCA library.
#[derive(Debug, Error)]
pub enum PerPcaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A retraction or factorization received a (numerically) rank-deficient matrix.
    #[error("rank-deficient input: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// A documented invariant (orthonormality, cross-orthogonality) does not hold.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("round {round}, client {client}: {source}")]
    Client {
        round: usize,
        client: usize,
        #[source]
        source: Box<PerPcaError>,
    },

    #[error("round {round}, server aggregation: {source}")]
    Server {
        round: usize,
        #[source]
        source: Box<PerPcaError>,
    },
}

pub type Result<T, E = PerPcaError> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::PerPcaError::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
