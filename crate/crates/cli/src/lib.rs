// SPDX-License-Identifier: Apache-2.0

//! File formats and commands of the `rsd` tool.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;
pub mod io;
pub mod report;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
