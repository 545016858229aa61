//! `boostr` command-line tool.
//!
//! Exit status is 0 on success, 1 on invalid input and 2 on numerical
//! failure. Errors are reported on stderr as a single line
//! `error[<kind>]: <reason>`.

mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use boostr::BoostError;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command, ExportCommand};

fn error_kind(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<BoostError>() {
        Some(BoostError::InvalidArgument(_)) => "invalid_argument",
        Some(BoostError::Parse { .. }) => "parse",
        Some(BoostError::GridMismatch) => "grid_mismatch",
        Some(BoostError::DimensionMismatch { .. }) => "dimension_mismatch",
        Some(BoostError::DegenerateRange(_)) => "degenerate_range",
        Some(BoostError::BoundViolation { .. }) => "bound_violation",
        Some(BoostError::NonConvergence(_)) => "non_convergence",
        Some(BoostError::UndefinedMetric(_)) => "undefined_metric",
        Some(BoostError::Unsupported(_)) => "unsupported",
        Some(BoostError::ModelFormat(_)) => "model_format",
        Some(BoostError::Io { .. }) => "io",
        Some(BoostError::Json(_)) => "json",
        None if err.downcast_ref::<clap::Error>().is_some() => "usage",
        None => "invalid_argument",
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<BoostError>() {
        Some(e) if e.is_numeric() => 2,
        _ => 1,
    }
}

fn one_line(err: &anyhow::Error) -> String {
    let text = match err.downcast_ref::<clap::Error>() {
        Some(e) => e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string(),
        None => {
            let mut text = String::new();
            for cause in err.chain().map(|c| c.to_string()) {
                if text.ends_with(&cause) {
                    continue;
                }
                if !text.is_empty() {
                    text.push_str(": ");
                }
                text.push_str(&cause);
            }
            text
        }
    };
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse(raw: Vec<OsString>) -> Result<Option<Cli>> {
    let root = Cli::command();
    let argv = match config::config_path(&raw) {
        Some(path) => config::apply_config(&root, raw, &PathBuf::from(path))?,
        None => raw,
    };
    match config::allow_overrides(root).try_get_matches_from(argv) {
        Ok(m) => Ok(Some(Cli::from_arg_matches(&m)?)),
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.print()?;
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(BoostError::InvalidArgument("threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Importance(a) => commands::importance(a),
        Command::Tune(a) => commands::tune_cmd(a),
        Command::Export(ExportCommand::Partition(a)) => commands::partition(a),
        Command::Export(ExportCommand::BetaMap(a)) => commands::beta_map(a),
    }
}

fn main() -> ExitCode {
    let result = parse(std::env::args_os().collect()).and_then(|cli| match cli {
        Some(cli) => run(cli),
        None => Ok(()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {}", error_kind(&err), one_line(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_failures_exit_two() {
        let e: anyhow::Error = BoostError::NonConvergence(50).into();
        assert_eq!((exit_code(&e), error_kind(&e)), (2, "non_convergence"));
        let e: anyhow::Error = BoostError::BoundViolation {
            time: 1.0,
            value: 2.0,
            bound: 1.0,
        }
        .into();
        assert_eq!(exit_code(&e), 2);
        let e: anyhow::Error = BoostError::InvalidArgument("x".into()).into();
        assert_eq!(exit_code(&e), 1);
    }

    #[test]
    fn messages_fit_on_one_line() {
        let e = anyhow::Error::from(BoostError::InvalidArgument("a\nb".into())).context("loading");
        assert_eq!(one_line(&e), "loading: invalid argument: a b");
    }
}
