//! `afcsim` — run, validate and list the simulator's experiments.

use anyhow::{bail, Context, Result};
use afcsim_core::harness::{run_experiment, validate_config, Experiment, ExperimentConfig};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "afcsim",
    about = "Atomic-frequency-comb spin-wave memory simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report files.
    Run {
        /// Experiment config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment name; overrides the config's `experiment` key.
        #[arg(long)]
        experiment: Option<String>,
        /// Random seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Report format: csv or json.
        #[arg(long)]
        format: Option<String>,
        /// Monte Carlo trials; 0 keeps the analytic path only.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Parse and validate a config, reporting the first problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the available experiment names.
    ListExperiments,
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    let raw = match path {
        Some(p) => {
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => String::new(),
    };
    Ok(validate_config(&raw)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            experiment,
            seed,
            out_dir,
            format,
            trials,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(name) = experiment {
                cfg.experiment = Some(Experiment::from_name(&name)?);
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = dir.display().to_string();
            }
            if let Some(fmt) = format {
                if fmt != "csv" && fmt != "json" {
                    bail!("--format must be csv or json");
                }
                cfg.format = fmt;
            }
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            let report = run_experiment(&cfg)?;
            let paths = report.write(PathBuf::from(&cfg.out_dir).as_path(), &cfg.format)?;
            println!(
                "{} [{}] finished in {} ms",
                report.experiment, report.config_hash, report.wall_ms
            );
            for (k, v) in &report.summary {
                println!("  {k} = {v:.6}");
            }
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(Some(&config))?;
            println!("ok: config hash {}", cfg.hash());
            match cfg.experiment {
                Some(e) => println!("experiment: {}", e.name()),
                None => println!("experiment: (none selected; pass --experiment at run time)"),
            }
        }
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{}", e.name());
            }
        }
    }
    Ok(())
}
