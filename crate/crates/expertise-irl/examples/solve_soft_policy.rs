//! Solve the soft value functions for one environment across a range of
//! temperatures and watch the policy sharpen: high β spreads probability
//! almost uniformly, low β concentrates on the best action, and below the
//! hard-max cutoff the solver switches to exact greedy backups.
//!
//!     cargo run --example solve_soft_policy

use std::sync::Arc;

use expertise_irl::envs::{generate_environment, GenerationConfig};
use expertise_irl::envs::zone::build_zone_mdp;
use expertise_irl::mdp::{ExpertiseLevel, RewardWeights};
use expertise_irl::solver::{maxent_policy, soft_value_iteration, SolverConfig};
use expertise_irl::Result;

fn main() -> Result<()> {
    let env = generate_environment(7, &GenerationConfig::default())?;
    let model = build_zone_mdp(&env, 0.95)?;
    let mdp = Arc::clone(&model.mdp);
    let theta = RewardWeights::new(vec![0.4, 0.2, 0.2, 0.1, 0.1])?;
    let start = mdp.non_terminal_states()[0];
    let cfg = SolverConfig::default();

    println!(
        "{}x{} grid, {} states, start state {start}",
        env.width,
        env.height,
        mdp.num_states()
    );
    println!("{:<10} {:>10} {:>8} {:>24}", "beta", "V(start)", "sweeps", "pi(.|start)");

    for beta in [10.0, 1.0, 0.1, 0.01, 1e-8] {
        let sol = soft_value_iteration(&mdp, &theta, ExpertiseLevel::new(beta)?, &cfg)?;
        let pi = maxent_policy(&sol, start);
        let dist: Vec<String> = pi.iter().map(|p| format!("{p:.3}")).collect();
        println!(
            "{:<10} {:>10.4} {:>8} {:>24}{}",
            beta,
            sol.value(start),
            sol.sweeps_used,
            dist.join(" "),
            if sol.is_hard_mode() { "   (hard max)" } else { "" }
        );
    }

    // The defining fixed point: with zero reward everywhere, the soft value
    // is the discounted entropy of the uniform policy.
    println!("\nentropy fixed point check (zero rewards, self-loop MDP):");
    let chain = expertise_irl::mdp::TabularMdp::new(
        vec![vec![0, 1, 2, 3]],
        vec![vec![0, 0, 0, 0]],
        vec![vec![expertise_irl::mdp::FeatureVector::zeros(1); 4]],
        vec![false],
        0.95,
    )?;
    let chain = Arc::new(chain);
    let zero = RewardWeights::new(vec![0.0])?;
    for beta in [0.01, 1.0, 10.0] {
        let sol = soft_value_iteration(&chain, &zero, ExpertiseLevel::new(beta)?, &cfg)?;
        let expected = beta * 4.0f64.ln() / (1.0 - 0.95);
        println!(
            "  beta = {beta:<5} V = {:>12.6}  beta*ln|A|/(1-gamma) = {expected:>12.6}",
            sol.value(0)
        );
    }
    Ok(())
}
