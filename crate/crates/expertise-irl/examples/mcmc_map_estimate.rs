//! Optimization-based inference: a grid-walk Metropolis sampler over the
//! continuous (θ, β) space, warm-starting each proposal's value solve from
//! the current one. Prints the chain's progress and compares the point
//! estimate to the truth — which, unlike the discrete filter's, need not
//! sit on any predefined grid.
//!
//!     cargo run --example mcmc_map_estimate

use expertise_irl::envs::{generate_environment, Environment, GenerationConfig};
use expertise_irl::mcmc::{export_chain_csv, run_chain, McmcConfig, PriorSpec};
use expertise_irl::mdp::{ExpertiseLevel, RewardWeights};
use expertise_irl::metrics::{expertise_distance, preference_similarity};
use expertise_irl::simulate::{generate_episode_set, SimulatorConfig};
use expertise_irl::solver::SolverConfig;
use expertise_irl::Result;

fn main() -> Result<()> {
    let env = generate_environment(31, &GenerationConfig::default())?;
    let model = Environment::ZoneGrid(env).build_model(0.95)?;
    let mdp = model.mdp();

    // Truth off the usual hypothesis grid on purpose.
    let theta_star = RewardWeights::new(vec![0.45, 0.25, 0.15, 0.1, 0.05])?;
    let beta_star = 0.35;
    let demos = generate_episode_set(
        mdp,
        &theta_star,
        ExpertiseLevel::new(beta_star)?,
        &SimulatorConfig { num_episodes: 30, horizon_cap: 120, seed: 3 },
    )?;
    println!(
        "demos: {} episodes, mean length {:.1}",
        demos.episodes.len(),
        demos.episodes.mean_length()
    );

    // The l1 cap matters: the maxent policy is unchanged by scaling theta
    // and beta together, so an unconstrained walk drifts along that ridge
    // and its post-burn-in mean smears. Bounding theta to the unit simplex
    // (where the truth lives) pins the scale.
    let cfg = McmcConfig {
        max_iterations: 1000,
        sparsity_bound: Some(1.0),
        seed: 9,
        ..McmcConfig::default()
    };
    let chain = run_chain(mdp, &demos.episodes, &PriorSpec::default(), &cfg, &SolverConfig::default())?;

    println!(
        "chain: {} iterations, acceptance rate {:.2}, {} warm-start fallbacks",
        chain.iterations.len(),
        chain.acceptance_rate(),
        chain.warm_fallbacks
    );
    for (i, it) in chain.iterations.iter().enumerate() {
        if (i + 1) % 250 == 0 {
            println!(
                "  after {:>4} steps: log posterior {:>10.3}, beta {:.3}",
                i + 1,
                it.log_posterior,
                it.beta
            );
        }
    }

    let (theta_hat, beta_hat) = chain.point_estimate()?;
    println!("\ntruth:    theta* = {:?}, beta* = {beta_star}", theta_star.as_slice());
    let rounded: Vec<String> = theta_hat.as_slice().iter().map(|v| format!("{v:.3}")).collect();
    println!("estimate: theta^ = [{}], beta^ = {beta_hat:.3}", rounded.join(", "));
    println!(
        "cosine similarity {:.3}, expertise distance {:.3}",
        preference_similarity(theta_star.as_slice(), theta_hat.as_slice())?,
        expertise_distance(beta_star, beta_hat)
    );

    let out = std::env::temp_dir().join("expertise-irl-examples");
    std::fs::create_dir_all(&out)?;
    let trace = out.join("chain.csv");
    export_chain_csv(&trace, &chain)?;
    println!("trace -> {}", trace.display());
    Ok(())
}
