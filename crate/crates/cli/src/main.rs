use std::process::ExitCode;

use avgov_cli::error::{EXIT_CLAIM, EXIT_OK, EXIT_USAGE};
use avgov_cli::{execute, Cli};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let report = match execute(&cli) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    print!("{}", report.json);
    if let Some(path) = &cli.flags.out {
        if let Err(e) = report.write_to(path) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    }
    match report.failed_claim {
        Some(claim) => {
            eprintln!("claim failed: {claim}");
            ExitCode::from(EXIT_CLAIM)
        }
        None => ExitCode::from(EXIT_OK),
    }
}
