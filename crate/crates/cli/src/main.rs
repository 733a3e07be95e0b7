mod args;
mod commands;
mod output;

use std::fmt::Display;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// A failed run: exit code plus one machine-readable line on stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, kind: &'static str, message: impl Display) -> Self {
        Failure { code, kind, message: message.to_string() }
    }

    /// Bad input: unreadable, unparsable or invalid scenarios and arguments.
    pub fn input(kind: &'static str, message: impl Display) -> Self {
        Failure::new(1, kind, message)
    }

    pub fn io(what: impl Display, e: std::io::Error) -> Self {
        Failure::new(1, "io", format!("{what}: {e}"))
    }

    /// Solver gave no usable answer.
    pub fn solver(message: impl Display) -> Self {
        Failure::new(2, "solver", message)
    }

    fn record(&self) -> String {
        let first = self.message.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
        serde_json::json!({ "error": self.kind, "message": first }).to_string()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", Failure::input("usage", e).record());
            return ExitCode::from(1);
        }
    };
    eprintln!("# config {}", serde_json::to_string(&cli).expect("config serializes"));
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("{}", Failure::input("usage", e).record());
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.record());
            ExitCode::from(f.code)
        }
    }
}
