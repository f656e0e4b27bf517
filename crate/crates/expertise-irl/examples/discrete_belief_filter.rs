//! Joint inference over a discrete hypothesis set: watch the posterior pull
//! mass onto the true (θ*, β*) pair as episodes arrive, then read off the
//! marginal-expectation point estimates and the MAP hypothesis.
//!
//!     cargo run --example discrete_belief_filter

use std::sync::Arc;

use expertise_irl::discrete::{build_hypothesis_set, init_belief, HypothesisSetSpec};
use expertise_irl::envs::{generate_environment, Environment, GenerationConfig};
use expertise_irl::mdp::{EpisodeSet, ExpertiseLevel};
use expertise_irl::simulate::{generate_episode_set, SimulatorConfig};
use expertise_irl::solver::SolverConfig;
use expertise_irl::Result;

fn main() -> Result<()> {
    let env = generate_environment(104, &GenerationConfig::default())?;
    let model = Environment::ZoneGrid(env).build_model(0.95)?;
    let mdp = model.mdp();

    // A small sampled hypothesis set; the demonstrator's truth is in it.
    let set = Arc::new(build_hypothesis_set(&HypothesisSetSpec {
        sample_k: Some(8),
        seed: 51,
        ..HypothesisSetSpec::default()
    })?);
    let theta_star = set.thetas[2].clone();
    let beta_star = ExpertiseLevel::new(0.09)?;
    let truth_idx = (0..set.len())
        .find(|&i| {
            let (t, b) = set.pair(i);
            t.as_slice() == theta_star.as_slice() && b.beta() == beta_star.beta()
        })
        .expect("truth is a member of the set");
    println!(
        "set: {} preference vectors x {} temperatures = {} hypotheses",
        set.thetas.len(),
        set.betas.len(),
        set.len()
    );
    println!("truth: theta* = {:?}, beta* = {}\n", theta_star.as_slice(), beta_star.beta());

    let demos = generate_episode_set(
        mdp,
        &theta_star,
        beta_star,
        &SimulatorConfig { num_episodes: 20, horizon_cap: 150, seed: 7 },
    )?;

    let mut belief = init_belief(Arc::clone(mdp), Arc::clone(&set), SolverConfig::default())?;
    println!("{:>9} {:>14} {:>9} {:>28}", "episodes", "P(truth)", "beta_hat", "theta_hat");
    let mut seen = 0;
    for budget in [5usize, 10, 15, 20] {
        let chunk = EpisodeSet::new(demos.episodes.trajectories[seen..budget].to_vec());
        belief = belief.update_with_episodes(&chunk)?;
        seen = budget;
        let (theta_hat, beta_hat) = belief.point_estimates();
        let rounded: Vec<String> =
            theta_hat.as_slice().iter().map(|v| format!("{v:.2}")).collect();
        println!(
            "{:>9} {:>14.6} {:>9.4} {:>28}",
            budget,
            belief.probability_of(truth_idx),
            beta_hat,
            rounded.join(" ")
        );
    }

    let (idx, map_theta, map_beta) = belief.map_hypothesis();
    println!(
        "\nMAP hypothesis #{idx}: theta = {:?}, beta = {}  (truth index {truth_idx})",
        map_theta.as_slice(),
        map_beta.beta()
    );
    Ok(())
}
