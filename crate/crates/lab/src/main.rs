use clap::{Parser, Subcommand};
use committee_lab::commands::{ablate, curves, pool_gen, separation_cmd, simulate, verify_bounds};
use committee_lab::error::{LabError, Result};
use committee_lab::scenario::{resolve, Overrides, Scenario, ENV_PREFIX};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "committee-lab",
    version,
    about = "Simulation laboratory for verifier-backed committee search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Trial-count override.
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Let COMMITTEE_LAB_* environment variables override scenario keys.
    #[arg(long, global = true)]
    allow_env_override: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol and report failure and event rates.
    Simulate,
    /// Check Monte Carlo failure rates against the analytic bound over a
    /// grid.
    VerifyBounds,
    /// Oracle best-of-k, system success, and recovery curves.
    Curves,
    /// Print the resource sizing rule output as JSON.
    Sizing {
        /// Target failure probability.
        #[arg(long)]
        delta: f64,
        /// Rank bound L (default: scenario task depth).
        #[arg(long)]
        depth: Option<u32>,
        /// Per-prompt coverage floor (default: scenario roles.alpha0).
        #[arg(long)]
        alpha0: Option<f64>,
        /// Critic edge (default: scenario roles.beta).
        #[arg(long)]
        beta0: Option<f64>,
        /// Comparator edge (default: scenario roles.sigma).
        #[arg(long)]
        sigma0: Option<f64>,
        /// Portfolio size (default: scenario roles.portfolio).
        #[arg(long)]
        portfolio: Option<u64>,
    },
    /// Coverage-without-identifiability demonstration.
    Separation {
        /// Number of hidden worlds M.
        #[arg(long, default_value_t = 5)]
        worlds: u32,
        /// Proposer-transcript samples shown to each critic.
        #[arg(long, default_value_t = 32)]
        transcript_samples: u32,
    },
    /// Generate a candidate-pool file for offline ablations.
    PoolGen,
    /// Run the fixed-pool selector ablations.
    Ablate {
        /// Existing pool file; generated from the scenario when omitted.
        #[arg(long)]
        pools: Option<PathBuf>,
    },
}

fn load_scenario(cli: &Cli) -> Result<(Scenario, PathBuf)> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| LabError::config("this command needs --scenario <file>"))?;
    let scenario = Scenario::from_file(path)?;
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        out: cli.out.clone(),
        allow_env_override: cli.allow_env_override,
    };
    let (scenario, out_dir) = resolve(scenario, &overrides)?;
    scenario.validate()?;
    Ok((scenario, out_dir))
}

fn resolve_workers(cli: &Cli) -> Option<usize> {
    cli.workers.or_else(|| {
        std::env::var(format!("{ENV_PREFIX}WORKERS")).ok().and_then(|v| v.parse().ok())
    })
}

fn run(cli: &Cli) -> Result<()> {
    let workers = resolve_workers(cli);
    match &cli.command {
        Command::Simulate => {
            let (scenario, out_dir) = load_scenario(cli)?;
            simulate::cmd_simulate(&scenario, &out_dir, workers)?;
        }
        Command::VerifyBounds => {
            let (scenario, out_dir) = load_scenario(cli)?;
            verify_bounds::cmd_verify_bounds(&scenario, &out_dir, workers)?;
        }
        Command::Curves => {
            let (scenario, out_dir) = load_scenario(cli)?;
            curves::cmd_curves(&scenario, &out_dir, workers)?;
        }
        Command::Sizing { delta, depth, alpha0, beta0, sigma0, portfolio } => {
            let scenario = match &cli.scenario {
                Some(path) => Some(Scenario::from_file(path)?),
                None => None,
            };
            let depth = depth
                .or_else(|| scenario.as_ref().map(|s| s.task.depth))
                .ok_or_else(|| LabError::config("sizing needs --depth or --scenario"))?;
            let alpha0 = alpha0
                .or_else(|| scenario.as_ref().map(|s| s.roles.alpha0))
                .ok_or_else(|| LabError::config("sizing needs --alpha0 or --scenario"))?;
            let beta0 = beta0
                .or_else(|| scenario.as_ref().map(|s| s.roles.beta))
                .ok_or_else(|| LabError::config("sizing needs --beta0 or --scenario"))?;
            let sigma0 = sigma0
                .or_else(|| scenario.as_ref().map(|s| s.roles.sigma))
                .ok_or_else(|| LabError::config("sizing needs --sigma0 or --scenario"))?;
            let portfolio = portfolio
                .or_else(|| scenario.as_ref().map(|s| s.roles.portfolio as u64))
                .ok_or_else(|| LabError::config("sizing needs --portfolio or --scenario"))?;
            let sizing = committee_core::bounds::sizing_rule(
                *delta, depth, alpha0, beta0, sigma0, portfolio,
            )?;
            println!("{}", serde_json::to_string_pretty(&sizing).expect("sizing serializes"));
        }
        Command::Separation { worlds, transcript_samples } => {
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let seed = cli.seed.unwrap_or(0);
            let trials = cli.trials.unwrap_or(20_000);
            separation_cmd::cmd_separation(*worlds, trials, *transcript_samples, seed, &out_dir)?;
        }
        Command::PoolGen => {
            let (scenario, out_dir) = load_scenario(cli)?;
            pool_gen::cmd_pool_gen(&scenario, &out_dir, workers)?;
        }
        Command::Ablate { pools } => {
            let (scenario, out_dir) = load_scenario(cli)?;
            ablate::cmd_ablate(&scenario, pools.as_deref(), &out_dir, workers)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
