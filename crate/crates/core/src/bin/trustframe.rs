use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trustframe::experiment::{
    execute_run, execute_sweep, parse_tolerances, verify_files, write_run, write_sweep, RunConfig,
};
use trustframe::protocol::ProtocolMode;

#[derive(Parser)]
#[command(
    version,
    about = "Validated iterative computation with an audit ledger"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write costs.csv, precision.csv, chain.bin and summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<ProtocolMode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a chain file's integrity and replay its audits.
    Verify {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep the study scenarios over a tolerance grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tolerances: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> trustframe::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            mode,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let a = execute_run(&cfg, mode, seed)?;
            write_run(&out, &a)?;
            print!("{}", a.summary);
            Ok(a.verification.as_ref().is_none_or(|r| r.passed()))
        }
        Command::Verify { chain, config } => {
            let outcome = verify_files(&chain, &config)?;
            print!("{}", outcome.render());
            Ok(outcome.passed())
        }
        Command::Sweep {
            config,
            tolerances,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let tols = match tolerances {
                Some(t) => parse_tolerances(&t)?,
                None => cfg.experiment.tolerances.clone(),
            };
            let sweep = execute_sweep(&cfg, &tols)?;
            write_sweep(&out, &cfg, &sweep)?;
            for r in &sweep.costs {
                println!(
                    "{:<20} tol {:<10} recomp/iter {:.3}  comm bits/dim {:.3}",
                    r.scenario.name(),
                    r.tolerance,
                    r.recomputations_per_iter,
                    r.comm_bits_per_dim
                );
            }
            for p in &sweep.precision {
                println!(
                    "{} batch {} accuracy {:.4}",
                    p.series, p.batch_size, p.accuracy
                );
            }
            Ok(true)
        }
    }
}
