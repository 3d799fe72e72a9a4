use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = paramid_cli::app::Cli::parse();
    match paramid_cli::app::execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
