// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A box maps to zero cells along an axis at the configured stride.
    #[error("degenerate box (w={w}, h={h}) at stride {stride}: covers no whole map cell")]
    DegenerateBox { w: f64, h: f64, stride: u32 },

    /// Two peaks with no integer line strictly between them.
    #[error("no separating line between peaks at {a:?} and {b:?}")]
    NoSeparator { a: (usize, usize), b: (usize, usize) },

    #[error("could not place {k} boxes after {attempts} attempts")]
    InfeasibleScene { k: usize, attempts: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
