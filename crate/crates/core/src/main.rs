use std::process::ExitCode;

use clap::Parser;
use shadowprice::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (code, report) = run(&cli);
    match &cli.opts.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &report) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{report}"),
    }
    ExitCode::from(code as u8)
}
