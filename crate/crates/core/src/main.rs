use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shallow_rates::cli::{run_norms, run_rate, run_sample, run_verify, ExperimentConfig, RunOptions};
use shallow_rates::Error;

#[derive(Parser)]
#[command(name = "shallow-rates", version, about = "Random-feature two-layer networks and their convergence rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Added to every seed in the config.
    #[arg(long, value_name = "K", default_value_t = 0)]
    seed_offset: u64,
    /// Fill the wall_ms column (makes rate.csv non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, assemble and score every (n, seed); fit the log-log slope.
    Rate(Common),
    /// Run oracle and invariant checks for the configured activation and target.
    Verify(Common),
    /// Barron and Sobolev norms of the target.
    Norms(Common),
    /// Dump the feature samples of every (n, seed).
    Sample(Common),
}

fn run(cli: Cli) -> Result<bool, Error> {
    let (Command::Rate(c) | Command::Verify(c) | Command::Norms(c) | Command::Sample(c)) = &cli.command;
    let config = ExperimentConfig::from_path(&c.config)?;
    let opts = RunOptions {
        out: Some(c.out.clone()),
        threads: c.threads,
        seed_offset: c.seed_offset,
        timing: c.timing,
    };
    match cli.command {
        Command::Rate(_) => {
            let outcome = run_rate(&config, &opts)?;
            match &outcome.fit {
                Some(f) => println!("slope {:.4} (n {}..{}, residual {:.3e})", f.slope, f.n_min, f.n_max, f.residual),
                None => println!("{} rows, no fit (fewer than 2 distinct n)", outcome.rows.len()),
            }
            Ok(true)
        }
        Command::Verify(_) => {
            let report = run_verify(&config, &opts)?;
            print!("{}", report.render());
            Ok(report.passed())
        }
        Command::Norms(_) => {
            for r in run_norms(&config, &opts)? {
                match r.value {
                    Some(v) => println!("{} {} {:.10e}", r.norm, r.order, v),
                    None => println!("{} {} {}", r.norm, r.order, r.status),
                }
            }
            Ok(true)
        }
        Command::Sample(_) => {
            for f in run_sample(&config, &opts)? {
                println!("{}", f.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
