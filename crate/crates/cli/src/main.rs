//! Command-line front-end.
//!
//! Every subcommand writes JSON lines (or CSV) to stdout or `--out`.
//! Exit status: 0 when every emitted check passes, 1 when one fails,
//! 2 for configuration errors, 3 when the library refuses a computation.

mod config;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, ConfigError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => return fail(2, &e.to_string()),
    };
    match run::run(cli.command, &cfg) {
        Ok(out) => {
            if let Err(e) = emit(&cfg.out, &out.text) {
                return fail(2, &format!("cannot write output: {e}"));
            }
            ExitCode::from(if out.all_passed { 0 } else { 1 })
        }
        Err(run::Failure::Config(e)) => fail(2, &e.to_string()),
        Err(run::Failure::Library(e)) => {
            if let lie_taylor::error::Error::ContinuationDiverged { partial, .. } = &e {
                if let Ok(s) = serde_json::to_string(partial) {
                    let _ = emit(&cfg.out, &format!("{s}\n"));
                }
            }
            fail(run::exit_code(&e), &e.to_string())
        }
    }
}

fn emit(out: &Option<std::path::PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

impl From<ConfigError> for run::Failure {
    fn from(e: ConfigError) -> Self {
        run::Failure::Config(e)
    }
}
