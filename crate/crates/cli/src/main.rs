//! `rotda` — benchmark CLI for cross-year station-hour demand transfer.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rotda_cli::commands;
use rotda_cli::config::{parse_method_list, ExperimentConfig};
use rotda_cli::data::resolve_data_dir;

#[derive(Parser)]
#[command(
    name = "rotda",
    version,
    about = "Cross-year bike-demand transfer benchmark",
    long_about = "Runs optimal-transport-based transfer methods on station-hour \
                  bike-demand panels and emits CSV reports. Panels come from the \
                  built-in synthetic generator by default; point --data-dir at \
                  cached panel files for real data."
)]
struct Cli {
    /// Config file of `key = value` lines; unset keys use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory of `panel_YYYY-MM.csv` files (overrides ROTDA_DATA_DIR and
    /// the config key).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Comma-separated method list override (e.g. `gen_rotda,source_only`).
    #[arg(long, global = true)]
    methods: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a panel cache from a raw trips CSV.
    Ingest {
        /// Raw trips CSV export (ride_id, started_at, start_station_id, ...).
        #[arg(long)]
        trips: PathBuf,
        /// Year whose configured month is ingested.
        #[arg(long)]
        year: i32,
    },
    /// Write synthetic panels for the whole multi-year range.
    Synth,
    /// Run the configured methods on the main source->target task.
    Run,
    /// Run the adjacent-year and two-year task suite with averages.
    Multiyear,
    /// Sweep contamination ratios over the unlabeled target pool.
    Robustness,
    /// Run the generator-by-robustness ablation grid.
    Ablation,
    /// Train the generator and report alignment diagnostics.
    Diagnose,
    /// Summarize cross-year demand shift per station-hour.
    ShiftSummary,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(methods) = &cli.methods {
        config.methods = parse_method_list(methods)?;
    }
    config.validate()?;
    let data_dir = resolve_data_dir(cli.data_dir.as_deref(), &config);
    let data_dir = data_dir.as_deref();
    let out = &cli.out;

    match cli.command {
        Command::Ingest { trips, year } => {
            commands::cmd_ingest(&config, data_dir, &trips, year)?;
        }
        Command::Synth => {
            commands::cmd_synth(&config, data_dir, out)?;
        }
        Command::Run => {
            commands::cmd_run(&config, data_dir, out)?;
        }
        Command::Multiyear => {
            commands::cmd_multiyear(&config, data_dir, out)?;
        }
        Command::Robustness => {
            commands::cmd_robustness(&config, data_dir, out)?;
        }
        Command::Ablation => {
            commands::cmd_ablation(&config, data_dir, out)?;
        }
        Command::Diagnose => {
            commands::cmd_diagnose(&config, data_dir, out)?;
        }
        Command::ShiftSummary => {
            commands::cmd_shift_summary(&config, data_dir, out)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
