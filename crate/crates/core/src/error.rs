use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("chain index {index} out of range for {chains} chains")]
    IndexOutOfRange { index: usize, chains: usize },

    /// A point outside the domain of the `K` function.
    #[error("(a={a}, b={b}) outside the K domain: {boundary}")]
    KDomain { a: f64, b: f64, boundary: &'static str },

    #[error("no equilibrium for working set {working_set}: {reason}")]
    NoEquilibrium { working_set: String, reason: String },

    #[error("too many chains to enumerate: {chains} > cap {cap}; restrict the search to prefix working sets")]
    EnumerationCap { chains: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The QR iteration hit its cap. Carries the eigenvalues that did converge.
    #[error("eigenvalue iteration did not converge after {iterations} iterations ({} of {dim} found)", .partial.len())]
    EigenConvergence {
        iterations: usize,
        dim: usize,
        partial: Vec<(f64, f64)>,
    },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from invalid user input rather than a
    /// numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidState(_)
                | Error::IndexOutOfRange { .. }
                | Error::KDomain { .. }
                | Error::NoEquilibrium { .. }
                | Error::EnumerationCap { .. }
        )
    }
}
