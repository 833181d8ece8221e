mod cli;

use std::process::ExitCode;

use clap::Parser;

use robust_gittins::Error;

fn main() -> ExitCode {
    let cli = match cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 2 } else { 0 });
        }
    };
    match cli::run(cli) {
        Ok(cli::Status::Success) => ExitCode::SUCCESS,
        Ok(cli::Status::ChecksFailed) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Domain(_) | Error::Guard(_) | Error::Parse(_) => ExitCode::from(2),
                Error::Numerical(_) | Error::Io { .. } => ExitCode::from(1),
            }
        }
    }
}
