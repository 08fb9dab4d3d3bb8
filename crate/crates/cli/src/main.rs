//! `otfs`: pilot design, sweeps, validation and reproduction of published
//! results.

mod commands;
mod config;
mod csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "otfs",
    version,
    about = "OTFS pilot allocation and power split toolkit"
)]
struct Cli {
    /// Base random seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory (reproduce) or file (sweep).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recommend the lowest-overhead allocation for a channel.
    Design {
        /// Maximum delay tap L.
        #[arg(long)]
        l: usize,
        /// Doppler order Q (even).
        #[arg(long)]
        q: usize,
        /// Frame size K = N·M (default 441).
        #[arg(long)]
        k: Option<usize>,
        /// Transmit SNR in dB.
        #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
        snr_tx_db: f64,
    },
    /// Reproduce a published table or figure as CSV.
    Reproduce { target: Target },
    /// Run an MSE, capacity or BER sweep from a TOML config.
    Sweep { config: PathBuf },
    /// Check pilot/data separation and Gram diagonality for a config.
    Validate { config: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Table1,
    Table2,
    Fig6c,
    Fig8,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let ov = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        out: cli.out,
    };
    match cli.command {
        Command::Design { l, q, k, snr_tx_db } => commands::cmd_design(l, q, k, snr_tx_db),
        Command::Reproduce { target } => match target {
            Target::Table1 => commands::reproduce_table1_cmd(&ov),
            Target::Table2 => commands::reproduce_table2_cmd(&ov),
            Target::Fig6c => commands::reproduce_fig6c_cmd(&ov),
            Target::Fig8 => commands::reproduce_fig8_cmd(&ov),
        },
        Command::Sweep { config } => commands::cmd_sweep(&config, &ov),
        Command::Validate { config } => commands::cmd_validate(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
