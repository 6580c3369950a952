//! `mixbn`: learn mixed-type Bayesian networks from CSV, restore gaps in
//! records, find analogues, score anomalies, run benchmarks and export graphs.

mod commands;
mod manifest;
mod record;

use std::process::ExitCode;

use clap::{error::ErrorKind, Parser};

use commands::Cli;

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("MIXBN_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow::anyhow!("MIXBN_THREADS must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err
        .chain()
        .any(|e| e.downcast_ref::<mixbn_core::Error>().is_some_and(mixbn_core::Error::is_internal));
    if internal {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match configure_threads().and_then(|()| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
