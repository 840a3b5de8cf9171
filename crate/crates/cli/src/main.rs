//! `senbd`: simulation, estimation, and network analysis of multivariate
//! self-exciting count processes from the command line.
//!
//! Every subcommand reads a TOML run configuration (`--config`), applies any
//! flag overrides, writes machine-readable outputs (a JSON result document
//! plus CSV tables), and exits nonzero with a single-line
//! `error: <category>: <message>` on failure.

mod commands;
mod config;
mod error;
mod io;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{ImpactArgs, SimulateArgs, SynthArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "senbd",
    version,
    about = "Multivariate self-exciting count processes: simulate, fit, and analyze"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(short = 'c', long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override (stochastic commands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for multistart fitting; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Path for the JSON result document (stdout when omitted).
    #[arg(short = 'o', long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a count panel from the configured model.
    Simulate {
        #[arg(long)]
        horizon: Option<usize>,
        /// Write the simulated panel to this CSV path.
        #[arg(long)]
        series_out: Option<PathBuf>,
        /// Run even when the spectral radius is at or above one.
        #[arg(long)]
        allow_nonstationary: bool,
    },
    /// Generate a synthetic dataset CSV for later fitting.
    Synth {
        #[arg(long)]
        horizon: Option<usize>,
        /// Destination CSV (overrides [synth].output).
        #[arg(long)]
        data_out: Option<PathBuf>,
        #[arg(long)]
        allow_nonstationary: bool,
    },
    /// Fit one model family to a count panel.
    Fit {
        /// Input CSV (overrides [fit].input).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit several families and rank them by AIC.
    AicTable {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Destination CSV for the comparison table.
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Shock impact analysis of the configured model.
    Impact {
        /// 0-based source line (all lines when omitted).
        #[arg(long)]
        source: Option<usize>,
        /// Also compute cumulative trajectories up to this horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        impact_out: Option<PathBuf>,
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
    },
    /// Export the interaction network as a directed edge list.
    Network {
        /// Keep edges with weight strictly above this.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        edges_out: Option<PathBuf>,
    },
    /// Correlation functions: empirical, closed-form, and integral-equation.
    Corr {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        corr_out: Option<PathBuf>,
    },
    /// Branching-process extinction probabilities and total progeny.
    Branching {
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config is required"))?;
    let config = RunConfig::load(config_path)?;
    let output = cli.output.as_ref();

    match cli.command {
        Command::Simulate {
            horizon,
            series_out,
            allow_nonstationary,
        } => commands::simulate_cmd(
            &config,
            cli.seed,
            output,
            SimulateArgs {
                horizon,
                series_out,
                allow_nonstationary,
            },
        ),
        Command::Synth {
            horizon,
            data_out,
            allow_nonstationary,
        } => commands::synth_cmd(
            &config,
            cli.seed,
            output,
            SynthArgs {
                horizon,
                data_out,
                allow_nonstationary,
            },
        ),
        Command::Fit { input } => commands::fit_cmd(&config, cli.seed, output, input),
        Command::AicTable { input, table_out } => {
            commands::aic_table_cmd(&config, cli.seed, output, input, table_out)
        }
        Command::Impact {
            source,
            horizon,
            impact_out,
            trajectory_out,
        } => commands::impact_cmd(
            &config,
            output,
            ImpactArgs {
                source,
                horizon,
                impact_out,
                trajectory_out,
            },
        ),
        Command::Network {
            threshold,
            edges_out,
        } => commands::network_cmd(&config, output, threshold, edges_out),
        Command::Corr { input, corr_out } => commands::corr_cmd(&config, output, input, corr_out),
        Command::Branching { curve_out } => {
            commands::branching_cmd(&config, cli.seed, output, curve_out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
