//! Simulate demonstrators of different expertise on the same map with the
//! same preferences. Experts (low β) walk nearly shortest paths; sloppy
//! demonstrators wander, so their episodes run long.
//!
//!     cargo run --example simulate_demonstrations

use expertise_irl::envs::{generate_environment, Environment, GenerationConfig};
use expertise_irl::io::save_trajectories;
use expertise_irl::mdp::{ExpertiseLevel, RewardWeights};
use expertise_irl::simulate::{generate_episode_set, SimulatorConfig};
use expertise_irl::Result;

fn main() -> Result<()> {
    let env = generate_environment(12, &GenerationConfig::default())?;
    let model = Environment::ZoneGrid(env).build_model(0.95)?;
    let theta = RewardWeights::new(vec![0.4, 0.2, 0.2, 0.1, 0.1])?;
    let out = std::env::temp_dir().join("expertise-irl-examples");
    std::fs::create_dir_all(&out)?;

    println!("{:<22} {:>9} {:>12} {:>10}", "demonstrator", "episodes", "mean length", "capped");
    for (label, beta) in [("expert  (beta 0.01)", 0.01), ("decent  (beta 1.0)", 1.0), ("novice  (beta 10)", 10.0)]
    {
        let cfg = SimulatorConfig { num_episodes: 20, horizon_cap: 300, seed: 42 };
        let beta = ExpertiseLevel::new(beta)?;
        let demos = generate_episode_set(model.mdp(), &theta, beta, &cfg)?;
        let capped = demos
            .episodes
            .trajectories
            .iter()
            .filter(|t| t.len() == cfg.horizon_cap)
            .count();
        println!(
            "{:<22} {:>9} {:>12.1} {:>10}",
            label,
            demos.episodes.len(),
            demos.episodes.mean_length(),
            capped
        );

        let path = out.join(format!("demos-beta-{}.jsonl", beta.beta()));
        save_trajectories(&path, &demos.episodes, Some((&theta, beta)))?;
        println!("{:<22} -> {}", "", path.display());
    }
    Ok(())
}
