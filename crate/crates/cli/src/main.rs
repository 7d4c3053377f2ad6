use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mf_cli::{coarsen_only, run, Report, RunConfig, THREADS_VAR};

#[derive(Parser)]
#[command(name = "mf", version, about = "Microstructure mesh coarsening and error analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarsen, solve, estimate errors and write all artifacts.
    Run { config: PathBuf },
    /// Coarsen only and write the meshes.
    Coarsen { config: PathBuf },
    /// Re-render summary.txt from an existing report.json.
    Report { dir: PathBuf },
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = value.trim().parse().with_context(|| format!("{THREADS_VAR}={value} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let report = run(&cfg)?;
            print!("{}", report.summary());
            println!("\nartifacts in {}", cfg.output_dir().display());
        }
        Command::Coarsen { config } => {
            let cfg = RunConfig::from_file(&config)?;
            println!("{:>4} {:>9} {:>8} {:>9}", "step", "elements", "hanging", "ndof");
            for s in coarsen_only(&cfg)? {
                println!("{:>4} {:>9} {:>8} {:>9}", s.step, s.elements, s.hanging_nodes, s.ndof);
            }
        }
        Command::Report { dir } => {
            let report = Report::read(&dir)?;
            print!("{}", report.write_summary(&dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
