use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shear_damping::runner::{configure_threads, error_exit_code, inspect, run, RunConfig, Task};

#[derive(Parser)]
#[command(name = "damping-lab", version, about = "Inviscid damping experiments for monotone shear flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task listed in the configuration
    Run { config: PathBuf },
    /// Run only the spectrum scan of the configuration
    Scan { config: PathBuf },
    /// Verify an output directory against its manifest and print the report
    Report { dir: PathBuf },
}

fn execute(cli: Cli) -> shear_damping::Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = run(&cfg)?;
            print!("{}", report.summary());
            Ok(report.exit_code())
        }
        Command::Scan { config } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.tasks = vec![Task::Scan];
            let report = run(&cfg)?;
            print!("{}", report.summary());
            Ok(report.exit_code())
        }
        Command::Report { dir } => {
            let d = inspect(&dir)?;
            print!("{}", d.report.summary());
            for p in &d.problems {
                eprintln!("manifest: {p}");
            }
            Ok(if !d.problems.is_empty() { 2 } else { d.report.exit_code() })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
