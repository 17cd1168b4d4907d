use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] evstp_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 1 config, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use evstp_core::Error as C;
        match self {
            Error::Config(_) => 1,
            Error::Parse { .. } | Error::Io { .. } | Error::Data(_) => 2,
            Error::Core(e) => match e {
                C::InvalidConfig(_)
                | C::UnknownFeatureSet(_)
                | C::DegenerateBBox
                | C::GridTooSmall { .. }
                | C::NegativeLambda(_) => 1,
                C::NonFinite(_) => 3,
                _ => 2,
            },
        }
    }
}
