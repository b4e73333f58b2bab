mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tel_core::engine::{AcceptorPolicy, RecordPolicy};

use config::{parse_random, parse_record_policy, ConfigFile, MarketSource, SCHEMA_VERSION};

/// Trial-and-error learning in decentralized matching markets.
///
/// Exit status: 0 on success, 1 when a run completes but misses its
/// target, 2 on configuration, input or size errors.
#[derive(Parser, Debug)]
#[command(name = "tel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random market and summarize its stable matchings.
    GenMarket {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded replications of the learning dynamics.
    Simulate(Experiment),
    /// Exact stationary analysis over a sweep of rates.
    Exact {
        #[command(flatten)]
        experiment: Experiment,
        /// Rates to solve at, comma separated.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Largest reachable state space to build.
        #[arg(long)]
        state_cap: Option<usize>,
        /// Also write the chain (state table and transitions) as JSON.
        #[arg(long)]
        export_chain: bool,
    },
    /// Predict the stochastically stable matchings from minimum in-trees.
    Predict {
        #[command(flatten)]
        experiment: Experiment,
        /// Also write the resistance graph in DOT format.
        #[arg(long)]
        dot: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Atl,
    AtlStar,
}

#[derive(Args, Debug, Default)]
struct Experiment {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Market JSON file.
    #[arg(long, conflicts_with = "random")]
    market: Option<PathBuf>,
    /// Random market as N,M,SEED.
    #[arg(long, value_parser = parse_random)]
    random: Option<MarketSource>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    burn_in: Option<f64>,
    /// Target failure probability; success means mass >= 1 - delta.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    replications: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "TEL_OUT")]
    out: Option<PathBuf>,
    /// full, summary or thin:K.
    #[arg(long, value_parser = parse_record_policy)]
    record: Option<RecordPolicy>,
}

impl Experiment {
    fn into_file(self) -> anyhow::Result<ConfigFile> {
        let base = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile { schema_version: SCHEMA_VERSION, ..Default::default() },
        };
        let flags = ConfigFile {
            schema_version: SCHEMA_VERSION,
            market: self.market.map(MarketSource::File).or(self.random),
            acceptor_policy: self.policy.map(|p| match p {
                Policy::Atl => AcceptorPolicy::Atl,
                Policy::AtlStar => AcceptorPolicy::AtlStar,
            }),
            epsilon: self.epsilon,
            horizon: self.horizon,
            burn_in_fraction: self.burn_in,
            delta: self.delta,
            replications: self.replications,
            seed: self.seed,
            output_dir: self.out,
            record_policy: self.record,
            ..Default::default()
        };
        Ok(base.overlay(flags))
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<commands::Status> {
    match cli.command {
        Command::GenMarket { n, m, seed, out } => commands::gen_market(n, m, seed, &out),
        Command::Simulate(e) => commands::simulate(e.into_file()?),
        Command::Exact { experiment, eps, state_cap, export_chain } => {
            let mut file = experiment.into_file()?;
            if eps.is_some() {
                file.epsilons = eps;
            }
            if state_cap.is_some() {
                file.state_cap = state_cap;
            }
            commands::exact(file, export_chain)
        }
        Command::Predict { experiment, dot } => commands::predict(experiment.into_file()?, dot),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
