//! `qseg`: data preparation, training, segmentation and evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{expand_argv, Cli};

/// A bad flag, flag combination or path.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const INTERNAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<args::ConfigError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<qseg_core::Error>() {
            return match e {
                qseg_core::Error::ConfigInvalid(_) => USAGE,
                _ => DATA,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return DATA;
        }
    }
    INTERNAL
}

fn main() -> ExitCode {
    let argv = match expand_argv(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.workers.max(1))
        .build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(INTERNAL);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e:#}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
