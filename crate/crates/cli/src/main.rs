use std::path::PathBuf;
use std::process::ExitCode;

use rll2d_cli::config::OUTPUT_ENV;
use rll2d_cli::{execute, parse_and_validate, CliError};

fn main() -> ExitCode {
    let env_output = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
    let config = match parse_and_validate(std::env::args_os(), env_output) {
        Ok(c) => c,
        Err(CliError::Usage(e)) => {
            // --help and --version are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&config) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
