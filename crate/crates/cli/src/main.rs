//! `tailclust` batch driver.
//!
//! Exit status: 0 success, 1 configuration error, 2 data error, 3 numeric or
//! fit error, 4 missing or stale upstream stage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use tailclust::pipeline::{self, Stage};
use tailclust::Error;

#[derive(Parser)]
#[command(name = "tailclust", version, about = "Lower-tail copula clustering and cluster-constrained CVaR backtests")]
struct Cli {
    /// Worker threads for the parallel stages.
    #[arg(long, global = true, env = "TAILCLUST_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage, reusing valid cached artifacts.
    Run { config: PathBuf },
    /// Run a single stage against cached upstream artifacts.
    Stage {
        /// ingest, marginals, copulas, ensemble, consensus or portfolio
        name: String,
        config: PathBuf,
    },
    /// Check the config and the price data without writing anything.
    Validate { config: PathBuf },
    /// Summarize a finished artifact directory.
    Report { artifact_dir: PathBuf },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config } => {
            let summary = pipeline::run_pipeline(&config, cli.workers)?;
            let names = |s: &[Stage]| s.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ");
            println!("executed: [{}]", names(&summary.executed));
            println!("cached: [{}]", names(&summary.cached));
        }
        Command::Stage { name, config } => {
            let stage: Stage = name.parse()?;
            pipeline::run_stage(&config, stage, cli.workers)?;
            println!("stage {stage} done");
        }
        Command::Validate { config } => {
            let cfg = pipeline::validate(&config)?;
            println!(
                "ok: {} ensemble members, {} strategies, output {}",
                cfg.ensemble.size(),
                cfg.portfolio.strategies.len(),
                cfg.output.dir.display()
            );
        }
        Command::Report { artifact_dir } => print!("{}", pipeline::report(&artifact_dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
