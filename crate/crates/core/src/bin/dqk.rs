use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use dqk_core::experiment::{
    run_suite, run_to_dir, validate, ErrorRecord, ExperimentConfig, SuiteOptions,
};
use dqk_core::Error;

#[derive(Parser)]
#[command(
    name = "dqk",
    version,
    about = "Distributed quantum kernel experiments"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Directory holding the dataset CSVs.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Concurrent suite cells.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named grid: table1, figure3 or figure4.
    Suite {
        name: String,
        /// Small sample caps and fewer shots.
        #[arg(long)]
        smoke: bool,
        /// Write per-session transcript records for protocol cells.
        #[arg(long)]
        transcripts: bool,
    },
    /// Report qubit budgets and workload for a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = &cli.data_dir {
        cfg.data_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializes")
    );
}

fn execute(cli: &Cli) -> Result<bool, (String, Error)> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config).map_err(|e| ("run".to_string(), e))?;
            let rows = run_to_dir(&cfg, &cli.out).map_err(|e| (cfg.name.clone(), e))?;
            for r in rows {
                println!(
                    "{} {} {} {}: {:.4} ± {:.4}",
                    r.dataset, r.method, r.mode, r.convention, r.mean, r.std
                );
            }
            Ok(true)
        }
        Command::Suite {
            name,
            smoke,
            transcripts,
        } => {
            let mut opts = SuiteOptions::new(&cli.out);
            if let Some(dir) = &cli.data_dir {
                opts.data_dir = dir.clone();
            }
            if let Some(seed) = cli.seed {
                opts.seed = seed;
            }
            opts.workers = cli.workers;
            opts.smoke = *smoke;
            opts.transcripts = *transcripts;
            let summary = run_suite(name, &opts).map_err(|e| (name.clone(), e))?;
            print_json(&summary);
            Ok(summary.failed == 0)
        }
        Command::Validate { config } => {
            let cfg = load(cli, config).map_err(|e| ("validate".to_string(), e))?;
            let report = validate(&cfg);
            print_json(&report);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err((cell, e)) => {
            let record = ErrorRecord::new(&cell, "", &e);
            eprintln!("{}", serde_json::to_string(&record).expect("serializes"));
            ExitCode::FAILURE
        }
    }
}
