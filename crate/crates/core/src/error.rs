use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter {theta:?} lies outside the domain {domain}")]
    OutOfDomain { theta: Vec<f64>, domain: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough observations: m = {m} is smaller than K = {k}")]
    PlanTooShort { m: usize, k: usize },

    #[error("all resampling weights are zero")]
    ZeroWeights,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("objective returned NaN {attempts} times in a row")]
    ObjectiveNan { attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
