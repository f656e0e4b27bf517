//! Command-line front end. Each subcommand is a thin wrapper around the
//! library; the interesting logic lives in the modules it calls.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::discrete::{
    build_hypothesis_set, export_belief_csv, init_belief, load_hypothesis_set, HypothesisSetSpec,
};
use crate::envs::{generate_environment, load_environment, save_environment, Environment,
    GenerationConfig, Heading, Model};
use crate::error::{Error, Result};
use crate::experiment::{
    analyze_results, load_experiment_config, load_results, run_experiment, write_correlations,
    write_results, ANALYSIS_FACTORS,
};
use crate::ingest::ingest_observations;
use crate::io::{load_raw_observations, load_trajectories, save_trajectories};
use crate::mcmc::{export_chain_csv, run_chain, McmcConfig, PriorSpec};
use crate::mdp::{validate_trajectory, EpisodeSet, ExpertiseLevel, RewardWeights};
use crate::rollout::{optimal_rollout, RolloutConfig, ROLLOUT_BETA};
use crate::seeds::derive_seed;
use crate::simulate::{generate_episode_set, SimulatorConfig};
use crate::solver::SolverConfig;

#[derive(Debug, Parser)]
#[command(
    name = "expertise-irl",
    version,
    about = "Joint inference of a demonstrator's preferences and expertise from trajectories"
)]
pub struct Cli {
    /// Master seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file or directory (command-dependent; see each subcommand).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Configuration file (TOML or JSON); required by `experiment`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackEndArg {
    Discrete,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Granularity {
    /// One belief update per episode.
    Trajectory,
    /// One belief update per observed action.
    Action,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long, value_enum)]
    pub back_end: BackEndArg,
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Hypothesis set JSON; defaults to the standard grid for the
    /// environment's feature dimension.
    #[arg(long)]
    pub hypotheses: Option<PathBuf>,
    /// Subsample the preference grid to k vectors (ignored with --hypotheses).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Granularity::Trajectory)]
    pub granularity: Granularity,
    /// Chain length for the mcmc back end.
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.95)]
    pub discount: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random environment files (out: directory).
    GenEnv {
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        min_side: usize,
        #[arg(long, default_value_t = 14)]
        max_side: usize,
    },
    /// Simulate a demonstrator and write trajectories (out: JSONL file).
    Simulate {
        #[arg(long)]
        env: PathBuf,
        /// True preference vector, comma-separated.
        #[arg(long)]
        theta: String,
        /// True temperature.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 500)]
        horizon_cap: usize,
        #[arg(long, default_value_t = 0.95)]
        discount: f64,
    },
    /// Estimate preferences and expertise from a trajectory file
    /// (out: belief or chain trace CSV).
    Infer(InferArgs),
    /// Run the full condition-comparison harness from a config file
    /// (out: directory for results.csv).
    Experiment,
    /// Correlate factors with metrics over a results CSV (out: CSV file).
    Analyze {
        #[arg(long)]
        results: PathBuf,
        /// Comma-separated factor columns; defaults to all known factors.
        #[arg(long)]
        factors: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
    },
    /// Reconstruct a trajectory from raw timestamped observations
    /// (out: JSONL file).
    Ingest {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        env: PathBuf,
        /// Keep every n-th observation.
        #[arg(long, default_value_t = 1)]
        downsample: usize,
        #[arg(long, default_value_t = 0.95)]
        discount: f64,
    },
    /// Execute an estimated preference vector near-greedily and report the
    /// path statistics (out: JSONL file).
    OptimalRollout {
        #[arg(long)]
        env: PathBuf,
        /// Estimated preference vector, comma-separated.
        #[arg(long)]
        theta: String,
        /// Start cell "x,y" (warehouses may append ",h" or ",v").
        #[arg(long)]
        start: String,
        #[arg(long, default_value_t = ROLLOUT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = 500)]
        horizon_cap: usize,
        #[arg(long, default_value_t = 0.95)]
        discount: f64,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        // Ignore the error if a pool already exists (tests call run() twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::GenEnv { count, min_side, max_side } => {
            cmd_gen_env(&cli, *count, *min_side, *max_side)
        }
        Command::Simulate { env, theta, beta, episodes, horizon_cap, discount } => {
            cmd_simulate(&cli, env, theta, *beta, *episodes, *horizon_cap, *discount)
        }
        Command::Infer(args) => cmd_infer(&cli, args),
        Command::Experiment => cmd_experiment(&cli),
        Command::Analyze { results, factors, permutations } => {
            cmd_analyze(&cli, results, factors.as_deref(), *permutations)
        }
        Command::Ingest { raw, env, downsample, discount } => {
            cmd_ingest(&cli, raw, env, *downsample, *discount)
        }
        Command::OptimalRollout { env, theta, start, beta, horizon_cap, discount } => {
            cmd_optimal_rollout(&cli, env, theta, start, *beta, *horizon_cap, *discount)
        }
    }
}

fn parse_weights(text: &str) -> Result<RewardWeights> {
    let values: Result<Vec<f64>> = text
        .split([',', ';'])
        .map(|p| {
            p.trim().parse::<f64>().map_err(|e| {
                Error::Usage(format!("cannot parse weight component {p:?}: {e}"))
            })
        })
        .collect();
    RewardWeights::new(values?)
}

fn load_model(path: &Path, discount: f64) -> Result<Model> {
    load_environment(path)?.build_model(discount)
}

fn out_file(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_gen_env(cli: &Cli, count: usize, min_side: usize, max_side: usize) -> Result<()> {
    let dir = out_dir(cli)?;
    let gen = GenerationConfig { min_side, max_side, ..GenerationConfig::default() };
    for i in 0..count {
        let env = generate_environment(derive_seed(cli.seed, &[i as u64]), &gen)?;
        let path = dir.join(format!("env-{i}.json"));
        save_environment(&path, &Environment::ZoneGrid(env))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_simulate(
    cli: &Cli,
    env: &Path,
    theta: &str,
    beta: f64,
    episodes: usize,
    horizon_cap: usize,
    discount: f64,
) -> Result<()> {
    let model = load_model(env, discount)?;
    let theta = parse_weights(theta)?;
    let beta = ExpertiseLevel::new(beta)?;
    let cfg = SimulatorConfig { num_episodes: episodes, horizon_cap, seed: cli.seed };
    let demos = generate_episode_set(model.mdp(), &theta, beta, &cfg)?;
    if let Some(warning) = &demos.warning {
        eprintln!("warning: {warning}");
    }
    let path = out_file(cli, "trajectories.jsonl");
    save_trajectories(&path, &demos.episodes, Some((&theta, beta)))?;
    println!(
        "{} episodes ({} steps) -> {}",
        demos.episodes.len(),
        demos.episodes.trajectories.iter().map(|t| t.len()).sum::<usize>(),
        path.display()
    );
    Ok(())
}

fn cmd_infer(cli: &Cli, args: &InferArgs) -> Result<()> {
    if args.back_end == BackEndArg::Mcmc && args.granularity == Granularity::Action {
        return Err(Error::Usage(
            "per-action granularity only applies to the discrete back end; \
             the sampler consumes whole trajectories"
                .into(),
        ));
    }
    let model = load_model(&args.env, args.discount)?;
    let mdp = model.mdp();
    let file = load_trajectories(&args.trajectories)?;
    let episodes = file.episodes();
    for (i, t) in episodes.trajectories.iter().enumerate() {
        validate_trajectory(mdp, t).map_err(|e| {
            Error::Validation(format!("trajectory {i} does not fit the environment: {e}"))
        })?;
    }
    let solver = SolverConfig::default();

    match args.back_end {
        BackEndArg::Discrete => {
            let set = match &args.hypotheses {
                Some(path) => load_hypothesis_set(path)?,
                None => build_hypothesis_set(&HypothesisSetSpec {
                    dim: mdp.feature_dim(),
                    sample_k: args.k,
                    seed: cli.seed,
                    ..HypothesisSetSpec::default()
                })?,
            };
            let mut belief = init_belief(Arc::clone(mdp), Arc::new(set), solver)?;
            match args.granularity {
                Granularity::Trajectory => {
                    belief = belief.update_with_episodes(&episodes)?;
                }
                Granularity::Action => {
                    for t in &episodes.trajectories {
                        for &(s, a) in &t.steps {
                            belief = belief.update_with_action(s, a)?;
                        }
                    }
                }
            }
            let (theta_hat, beta_hat) = belief.point_estimates();
            let (_, map_theta, map_beta) = belief.map_hypothesis();
            let path = out_file(cli, "belief.csv");
            export_belief_csv(&path, &belief)?;
            if belief.underflow_events > 0 {
                eprintln!(
                    "warning: {} update(s) drove every hypothesis below the underflow \
                     threshold; estimates may lean on renormalization",
                    belief.underflow_events
                );
            }
            println!("theta_hat = {:?}", theta_hat.as_slice());
            println!("beta_hat = {beta_hat}");
            println!(
                "map_hypothesis = ({:?}, {})",
                map_theta.as_slice(),
                map_beta.beta()
            );
            println!("belief -> {}", path.display());
        }
        BackEndArg::Mcmc => {
            let cfg = McmcConfig {
                max_iterations: args.iterations,
                seed: cli.seed,
                ..McmcConfig::default()
            };
            let chain = run_chain(mdp, &episodes, &PriorSpec::default(), &cfg, &solver)?;
            let (theta_hat, beta_hat) = chain.point_estimate()?;
            let path = out_file(cli, "chain.csv");
            export_chain_csv(&path, &chain)?;
            println!("theta_hat = {:?}", theta_hat.as_slice());
            println!("beta_hat = {beta_hat}");
            println!(
                "acceptance_rate = {:.3}, best_log_posterior = {:.3}",
                chain.acceptance_rate(),
                chain.best_log_posterior
            );
            println!("chain trace -> {}", path.display());
        }
    }
    Ok(())
}

fn cmd_experiment(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("experiment requires --config <file>".into()))?;
    let mut cfg = load_experiment_config(config_path)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let rows = run_experiment(&cfg)?;
    let results_path = cfg.out_dir.join("results.csv");
    write_results(&results_path, &rows)?;
    // Keep the exact config next to the numbers it produced.
    if let Some(name) = config_path.file_name() {
        let copy = cfg.out_dir.join(name);
        if copy != *config_path {
            std::fs::copy(config_path, copy)?;
        }
    }
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    println!(
        "{} rows ({} failed) -> {}",
        rows.len(),
        failed,
        results_path.display()
    );
    Ok(())
}

fn cmd_analyze(
    cli: &Cli,
    results: &Path,
    factors: Option<&str>,
    permutations: usize,
) -> Result<()> {
    let rows = load_results(results)?;
    let factor_list: Vec<&str> = match factors {
        Some(list) => list.split(',').map(str::trim).collect(),
        None => ANALYSIS_FACTORS.to_vec(),
    };
    let table = analyze_results(&rows, &factor_list, permutations, cli.seed)?;
    let path = out_file(cli, "correlations.csv");
    write_correlations(&path, &table)?;
    for row in &table {
        match (row.rho, row.p_value) {
            (Some(rho), Some(p)) => println!(
                "{} ~ {}: rho = {rho:+.3}, p = {p:.4} (n = {})",
                row.factor, row.metric, row.n
            ),
            _ => println!("{} ~ {}: {} (n = {})", row.factor, row.metric, row.note, row.n),
        }
    }
    println!("correlations -> {}", path.display());
    Ok(())
}

fn cmd_ingest(cli: &Cli, raw: &Path, env: &Path, downsample: usize, discount: f64) -> Result<()> {
    let model = load_model(env, discount)?;
    let observations = load_raw_observations(raw)?;
    let trajectory = ingest_observations(&model, &observations, downsample)?;
    let path = out_file(cli, "ingested.jsonl");
    save_trajectories(&path, &EpisodeSet::new(vec![trajectory.clone()]), None)?;
    println!(
        "{} observations -> {} steps -> {}",
        observations.len(),
        trajectory.len(),
        path.display()
    );
    Ok(())
}

fn parse_start(model: &Model, text: &str) -> Result<usize> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(Error::Usage(format!(
            "start must be \"x,y\" or \"x,y,h|v\", got {text:?}"
        )));
    }
    let x: usize = parts[0]
        .parse()
        .map_err(|e| Error::Usage(format!("bad start x: {e}")))?;
    let y: usize = parts[1]
        .parse()
        .map_err(|e| Error::Usage(format!("bad start y: {e}")))?;
    let heading = match parts.get(2) {
        Some(&"h") => Some(Heading::Horizontal),
        Some(&"v") => Some(Heading::Vertical),
        Some(other) => {
            return Err(Error::Usage(format!("heading must be h or v, got {other:?}")))
        }
        None => None,
    };
    model.state_of((x, y), heading)
}

fn cmd_optimal_rollout(
    cli: &Cli,
    env: &Path,
    theta: &str,
    start: &str,
    beta: f64,
    horizon_cap: usize,
    discount: f64,
) -> Result<()> {
    let model = load_model(env, discount)?;
    let theta = parse_weights(theta)?;
    let start = parse_start(&model, start)?;
    let cfg = RolloutConfig { beta, horizon_cap, seed: cli.seed };
    let roll = optimal_rollout(&model, &theta, start, &cfg, &SolverConfig::default())?;
    let path = out_file(cli, "rollout.jsonl");
    save_trajectories(&path, &EpisodeSet::new(vec![roll.trajectory.clone()]), None)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&roll.summary)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?
    );
    println!("trajectory -> {}", path.display());
    Ok(())
}
