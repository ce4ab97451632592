//! `cmdp` command line: solve single configs, sweep hyperparameter grids,
//! print oracle ground truth and coreset designs, and summarize sweep
//! output directories.
//!
//! Exit codes: 0 success, 2 config error, 3 infeasible problem,
//! 4 numerical failure, 1 other (I/O).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmdp::harness::{report_dir, run_sweep, CellStatus, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "cmdp", about = "Constrained-MDP primal-dual experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment and write its per-iteration CSV.
    Solve {
        config: PathBuf,
        /// Seed override; defaults to the first entry of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; defaults to `<output>/solve_seed<seed>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every hyperparameter cell of the config over all seeds.
    Sweep {
        config: PathBuf,
        /// Worker threads for the cell pool (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print ground-truth quantities (LP optimum, zeta, dual scan, eps_b) as JSON.
    Oracle { config: PathBuf },
    /// Print the G-optimal design for the configured features as JSON.
    Coreset { config: PathBuf },
    /// Summarize a sweep output directory.
    Report { dir: PathBuf },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Solve { config, seed, out } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = seed.unwrap_or(config.seeds[0]);
            let (artifacts, path) = cmdp::harness::run_experiment(&config, seed, out.as_deref())?;
            println!(
                "wrote {} ({} iterations, final og {:.6}, final cv {:.6})",
                path.display(),
                artifacts.log.len(),
                artifacts.final_og,
                artifacts.final_cv,
            );
            Ok(())
        }
        Command::Sweep { config, jobs } => {
            let config = ExperimentConfig::load(&config)?;
            let sweep = run_sweep(&config, jobs)?;
            let failed = sweep
                .cells
                .iter()
                .filter(|c| matches!(c.status, CellStatus::Failed(_)))
                .count();
            println!(
                "{} cells x {} seeds -> {} (failed cells: {failed})",
                sweep.cells.len(),
                config.seeds.len(),
                sweep.summary_path.display(),
            );
            match sweep.best {
                Some(best) => println!("best cell: {} ({})", best, sweep.cells[best].label),
                None => println!("best cell: none (no cell satisfied CV in [-0.25, 0])"),
            }
            Ok(())
        }
        Command::Oracle { config } => {
            let config = ExperimentConfig::load(&config)?;
            let report = cmdp::harness::oracle_report(&config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Coreset { config } => {
            let config = ExperimentConfig::load(&config)?;
            let report = cmdp::harness::coreset_report(&config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Report { dir } => {
            print!("{}", report_dir(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
