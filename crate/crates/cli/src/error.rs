use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or usage; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A numerical contract was violated; exit code 3.
    #[error("numerical contract violated: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn field(field: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("field `{field}`: {msg}"))
    }
}

impl From<radpair::Error> for CliError {
    fn from(e: radpair::Error) -> Self {
        use radpair::Error as E;
        match e {
            E::StepTooLarge { .. }
            | E::Unphysical(_)
            | E::FitResidual { .. }
            | E::NotHermitian { .. }
            | E::NegativeRate(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
