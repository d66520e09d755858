use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use qdissect_cli::commands::{exit_status, run, Cli};
use qdissect_cli::output::render;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result =
        run(&cli).and_then(|records| Ok((render(&records, cli.format)?, exit_status(&records))));
    match result {
        Ok((text, status)) => {
            let mut out = std::io::stdout().lock();
            if out
                .write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(2);
            }
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
