// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use crate::args::{Cli, Command};
use crate::error::{validation, CliError, CliResult};

pub mod bench;
pub mod decode;
pub mod encode;
pub mod evaluate;
pub mod grad_check;
pub mod synth;

/// Runs one command; reports go to `out`, diagnostics to the log.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::EncodeGt(a) => encode::run(a),
        Command::Decode(a) => decode::run(a),
        Command::EvalDet(a) => evaluate::run_det(a, out),
        Command::EvalMap(a) => evaluate::run_map(a, out),
        Command::EvalCount(a) => evaluate::run_count(a, out),
        Command::Synth(a) => synth::run(a),
        Command::GradCheck(a) => grad_check::run(a, out),
        Command::Bench(a) => bench::run(a, out),
    }
}

/// Logs per-item failures and turns any into a validation error once every item was tried.
pub(crate) fn finish_batch(what: &str, total: usize, failures: Vec<(String, CliError)>) -> CliResult<()> {
    if failures.is_empty() {
        return Ok(());
    }
    for (id, e) in &failures {
        log::error!("{id}: {e}");
    }
    let worst = failures
        .iter()
        .map(|(_, e)| e.exit_code())
        .max()
        .unwrap_or(CliError::EXIT_VALIDATION);
    let msg = format!("{} of {total} {what} failed", failures.len());
    Err(if worst == CliError::EXIT_VALIDATION {
        validation(msg)
    } else {
        CliError::Parse(msg)
    })
}

pub(crate) fn write_report(text: &str, path: Option<&std::path::Path>, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => crate::io::write_atomic(p, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io {
            context: "stdout".into(),
            source: e,
        }),
    }
}
