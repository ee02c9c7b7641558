// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad parameters, inconsistent records, or failed checks.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub const EXIT_VALIDATION: i32 = 1;
    pub const EXIT_IO: i32 = 2;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => Self::EXIT_VALIDATION,
            CliError::Parse(_) | CliError::Io { .. } => Self::EXIT_IO,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }

    pub fn parse(source: impl std::fmt::Display, msg: impl std::fmt::Display) -> Self {
        CliError::Parse(format!("{source}: {msg}"))
    }
}

impl From<rsd_core::Error> for CliError {
    fn from(e: rsd_core::Error) -> Self {
        use rsd_core::Error as E;
        match e {
            E::Parse(m) => CliError::Parse(m),
            E::Io(source) => CliError::Io {
                context: "i/o".into(),
                source,
            },
            E::Json(j) => CliError::Parse(j.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
