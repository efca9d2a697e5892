use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cogsense::harness::{
    cmd_bounds, cmd_l_sweep, cmd_offline_table, cmd_simulate, Algorithm, CommandReport, ExperimentConfig, Overrides,
    OUT_DIR_ENV,
};
use cogsense::par::Execution;

/// Cost-aware spectrum access experiments.
#[derive(Debug, Parser)]
#[command(name = "cogsense", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal policy structure over a grid of (p0, c0) pairs.
    OfflineTable(Common),
    /// Multi-run regret simulation of the configured algorithms.
    Simulate(Common),
    /// Alg1 regret for each exploration slope in `[l_sweep] values`.
    LSweep(Common),
    /// Regret bound constants and the lower-bound report.
    Bounds(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; the reference setup is used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and $COGSENSE_OUT_DIR).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed; run r uses seed + r.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    runs: Option<u64>,
    #[arg(long, value_name = "T")]
    horizon: Option<u64>,
    /// Comma-separated subset of offline,alg1,eps_greedy,thompson.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, Execution)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::reference(),
        };
        let algorithms = self
            .algorithms
            .as_ref()
            .map(|list| list.iter().map(|s| Algorithm::parse(s)).collect::<Result<Vec<_>, _>>())
            .transpose()?;
        let overrides = Overrides {
            out_dir: self.out.clone(),
            seed: self.seed,
            runs: self.runs,
            horizon: self.horizon,
            algorithms,
        };
        let env_out = std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        cfg.apply(&overrides, env_out).context("invalid overrides")?;
        let mode = if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok((cfg, mode))
    }
}

fn report(r: &CommandReport) {
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    for f in &r.files {
        println!("{}", f.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::OfflineTable(c) => {
            let (cfg, _) = c.resolve()?;
            report(&cmd_offline_table(&cfg)?);
        }
        Command::Simulate(c) => {
            let (cfg, mode) = c.resolve()?;
            report(&cmd_simulate(&cfg, mode)?.report);
        }
        Command::LSweep(c) => {
            let (cfg, mode) = c.resolve()?;
            report(&cmd_l_sweep(&cfg, mode)?.report);
        }
        Command::Bounds(c) => {
            let (cfg, _) = c.resolve()?;
            report(&cmd_bounds(&cfg)?.0);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
