use std::process::ExitCode;

use replicate_cli::CliError;

fn main() -> ExitCode {
    match replicate_cli::run(std::env::args_os().collect()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
