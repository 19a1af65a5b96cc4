use su11_core::Error as CoreError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration file or command-line value.
    #[error("config error: `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    NonConvergence(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Data(_) => 3,
            Self::NonConvergence(_) => 4,
            Self::Io(_) => 1,
        }
    }

    /// Core error raised while validating configuration values.
    pub fn from_config(err: CoreError) -> Self {
        match err {
            CoreError::InvalidParameter { name, value, reason } => {
                let key = if name == "nu" { "n_inside" } else { name };
                let message = if name == "nu" {
                    format!("derived mode transmission nu = {value} {reason}")
                } else {
                    format!("value {value} {reason}")
                };
                Self::config(key, message)
            }
            other => Self::from(other),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::NonConvergence { .. } => Self::NonConvergence(err.to_string()),
            CoreError::InvalidParameter { name, .. } => Self::config(name, err.to_string()),
            _ => Self::Data(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err.to_string())
    }
}
