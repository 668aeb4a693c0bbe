use std::process::ExitCode;

use clap::Parser;
use lrsdp_cli::{execute, threads, Cli, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = threads(&cli) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("lrsdp: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    match execute(&cli) {
        Ok(out) => {
            let written = match &out.out {
                Some(path) => std::fs::write(path, &out.text),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("lrsdp: writing report: {e}");
                return ExitCode::from(EXIT_ERROR as u8);
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("lrsdp: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
