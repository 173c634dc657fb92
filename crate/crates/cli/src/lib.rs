//! The `lpdist` command line: sampling, CLT checks, the exact sphere law,
//! rate functions and tail estimates, with reproducible CSV/JSON outputs.

pub mod config;
pub mod output;
pub mod run;

pub use config::{CommandKind, ConfigError, RunConfig, WORKERS_ENV};
pub use output::Manifest;
pub use run::{run, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

/// Parses `argv` and runs it. Usage errors exit 2 before anything is
/// written.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    match RunConfig::parse(&argv) {
        Ok(config) => run(&config, &argv),
        Err(ConfigError::Info(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(ConfigError::Usage(text)) => {
            eprintln!("{}", text.trim_end());
            EXIT_USAGE
        }
    }
}
