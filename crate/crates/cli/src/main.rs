use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;
mod svg;

/// Replicator dynamics and equilibrium analysis for processor allocation
/// across sharded blockchains.
#[derive(Parser)]
#[command(name = "shard-evo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG line charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args)]
pub struct StartState {
    /// Initial state as comma-separated shares (default: barycentre).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Divide the initial state by its sum before use.
    #[arg(long)]
    pub normalize_x0: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the replicator dynamics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartState,
        /// Final time (overrides the config).
        #[arg(long)]
        t_end: Option<f64>,
        /// Fixed RK4 step (overrides the config).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Payoffs along a trajectory CSV.
    Payoffs {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV written by `simulate`.
        #[arg(short, long)]
        trajectory: PathBuf,
    },
    /// Enumerate and classify all equilibria.
    Equilibria {
        #[command(flatten)]
        common: Common,
    },
    /// Stable equilibrium as every coefficient is scaled by κ.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter; only `kappa` is supported.
        #[arg(long)]
        parameter: Option<String>,
        /// Comma-separated increasing grid (default 0.5, 0.6, ..., 1.5).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Finite-population imitation runs compared with the replicator ODE.
    Agents {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartState,
        #[command(flatten)]
        spec: commands::AgentFlags,
    },
    /// Committee-formation work, epoch time, reward and cost per chain.
    EpochModel {
        #[command(flatten)]
        flags: commands::EpochFlags,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(error::EXIT_PARSE as u8) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate { common, start, t_end, step } => commands::simulate(&common, &start, t_end, step),
        Command::Payoffs { common, trajectory } => commands::payoffs(&common, &trajectory),
        Command::Equilibria { common } => commands::equilibria(&common),
        Command::Sweep { common, parameter, grid } => commands::sweep(&common, parameter, grid),
        Command::Agents { common, start, spec } => commands::agents(&common, &start, &spec),
        Command::EpochModel { flags } => commands::epoch_model(&flags),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
