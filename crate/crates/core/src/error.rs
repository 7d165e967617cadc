use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a function or constructor.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("non-finite state at step {step} (t = {t}, x = {x})")]
    NonFinite { step: usize, t: f64, x: f64 },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 = usage, 3 = data (input files, parsing, I/O), 4 = numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
            Error::Domain(_)
            | Error::NonConvergence(_)
            | Error::NonFinite { .. }
            | Error::Partition(_)
            | Error::UndefinedMoment(_)
            | Error::Quadrature(_) => 4,
        }
    }
}
