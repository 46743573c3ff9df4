use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use decomp_harness::commands::{run, CommandKind};
use decomp_harness::config::Overrides;

#[derive(Parser)]
#[command(name = "decomp", about = "Monte Carlo portfolio decomposition", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides outputs.directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides mc.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Time steps (overrides grid.steps)
    #[arg(long)]
    steps: Option<usize>,
    /// Simulated paths (overrides mc.paths)
    #[arg(long)]
    paths: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            steps: self.steps,
            paths: self.paths,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the state bundle and report distribution summaries
    Simulate(RunArgs),
    /// Myopic layer: value weights, replication residual, budget identity
    Myopic(RunArgs),
    /// Hedge layer: fitted martingale-representation coefficients
    Hedge(RunArgs),
    /// Full decomposition: wealth split, myopic and hedging portfolios
    Decompose(RunArgs),
    /// Run the verification suite
    Verify(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Myopic(a) => (CommandKind::Myopic, a),
        Command::Hedge(a) => (CommandKind::Hedge, a),
        Command::Decompose(a) => (CommandKind::Decompose, a),
        Command::Verify(a) => (CommandKind::Verify, a),
    };
    std::process::exit(run(kind, &args.config, &args.overrides()));
}
