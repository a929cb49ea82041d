use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use hbmsort::config::Config;
use hbmsort::dataset::{DatasetSpec, Distribution};
use hbmsort::harness;
use hbmsort::sort_engine::{Mode, RunOptions};
use hbmsort::{Error, Result};

#[derive(Parser)]
#[command(name = "hbmsort", version, about = "Two-phase merge-tree sorter and HBM accelerator model")]
struct Cli {
    /// TOML configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Functional)]
    mode: Mode,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Phase-1 worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Also write the report as JSON to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Time from the plan without materializing records.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset of 8-byte records.
    Gen {
        #[arg(long)]
        records: u64,
        #[arg(long, value_enum, default_value_t = Distribution::Permutation)]
        distribution: Distribution,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Sort a dataset file, or a seeded permutation when no input is given.
    Sort {
        input: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Size of the generated permutation or dry run; defaults to the config.
        #[arg(long)]
        records: Option<u64>,
    },
    /// Print the analytic models for the configuration.
    Model,
    /// Throughput across data sizes.
    Sweep,
    /// Check a sorted file.
    Validate {
        sorted: PathBuf,
        /// Original input; without it the keys must be exactly 1..=N.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let opts = RunOptions { mode: cli.mode, threads: cli.threads };
    let report = cli.report.as_deref();

    match cli.command {
        Command::Gen { records, distribution, out } => {
            let spec = DatasetSpec { records, distribution, seed: cli.seed };
            harness::cmd_gen(&spec, &out)?;
            println!("wrote {records} records to {}", out.display());
            Ok(true)
        }
        Command::Sort { input, out, records } => {
            if let Some(n) = records {
                config.sort.records = n;
            }
            let r = match (&input, cli.dry_run) {
                (_, true) => harness::cmd_sort_dry(&config, opts)?,
                (Some(path), false) => harness::cmd_sort(&config, path, out.as_deref(), opts)?,
                (None, false) => harness::sort_generated(&config, config.sort.records, cli.seed, opts)?,
            };
            print!("{}", r.to_text());
            write_json(report, &r)?;
            Ok(r.verdict.ok())
        }
        Command::Model => {
            let r = harness::cmd_model(&config)?;
            print!("{}", r.to_text());
            write_json(report, &r)?;
            Ok(true)
        }
        Command::Sweep => {
            if cli.dry_run {
                config.sweep.materialize_limit = 0;
            }
            let r = harness::cmd_sweep(&config, cli.seed, opts)?;
            print!("{}", r.to_text());
            write_json(report, &r)?;
            Ok(r.ok())
        }
        Command::Validate { sorted, input } => {
            let r = harness::cmd_validate(&sorted, input.as_deref())?;
            println!("{} records: {}", r.records, r.verdict);
            write_json(report, &r)?;
            Ok(r.verdict.ok())
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
