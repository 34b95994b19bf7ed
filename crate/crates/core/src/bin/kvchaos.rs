use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kvchaos::commands::{run_expand, run_kernels, run_simulate};
use kvchaos::config::ExperimentConfig;
use kvchaos::verify::{run_verify, with_workers, workers_from_env};
use kvchaos::Result;

#[derive(Parser)]
#[command(name = "kvchaos", version, about = "Chaos expansions of boundary functionals of a tilted stopped Wiener process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the acceptance suite and write report.json / report.csv.
    Verify(Common),
    /// Tabulate the chaos kernels and their Parseval terms.
    Kernels(Common),
    /// Simulate paths and estimate `simulate.estimator`.
    Simulate(Common),
    /// Monte Carlo chaos expansion up to order N.
    Expand(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        config.mc.seed = seed;
    }
    if let Some(out) = &c.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<bool> {
    let workers = workers_from_env()?;
    match cli.command {
        Command::Verify(c) => {
            let config = load(&c)?;
            let report = with_workers(workers, || run_verify(&config))??;
            for r in &report.records {
                println!(
                    "{:<4} {:<5} {:<36} computed {:>13.6e} oracle {:>13.6e} tol {:>10.3e}",
                    r.check,
                    if r.passed { "pass" } else { "FAIL" },
                    r.name,
                    r.computed,
                    r.oracle,
                    r.tolerance
                );
            }
            println!(
                "{} -> {}",
                if report.passed { "all checks passed" } else { "some checks failed" },
                config.out.display()
            );
            Ok(report.passed)
        }
        Command::Kernels(c) => {
            let config = load(&c)?;
            let out = with_workers(workers, || run_kernels(&config))??;
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Simulate(c) => {
            let config = load(&c)?;
            let out = with_workers(workers, || run_simulate(&config))??;
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Expand(c) => {
            let config = load(&c)?;
            let out = with_workers(workers, || run_expand(&config))??;
            println!("{}", serde_json::to_string_pretty(&out)?);
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
            ExitCode::from(2)
        }
    }
}
