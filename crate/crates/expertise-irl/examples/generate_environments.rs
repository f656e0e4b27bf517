//! Generate a handful of random zone gridworlds and describe what came out:
//! sizes, zone mix, and how much of each map can actually reach the goal.
//!
//!     cargo run --example generate_environments

use expertise_irl::envs::{generate_environment, Environment, GenerationConfig, ZoneKind};
use expertise_irl::Result;

fn main() -> Result<()> {
    let out = std::env::temp_dir().join("expertise-irl-examples");
    std::fs::create_dir_all(&out)?;
    let gen = GenerationConfig::default();

    for seed in 0..5u64 {
        let env = generate_environment(seed, &gen)?;
        let model = Environment::ZoneGrid(env.clone()).build_model(0.95)?;
        let mdp = model.mdp();

        let count = |kind: ZoneKind| env.zones.iter().filter(|z| z.kind == kind).count();
        println!(
            "seed {seed}: {}x{} grid, goal at {:?}, {} states",
            env.width,
            env.height,
            env.goal,
            mdp.num_states()
        );
        println!(
            "  zones: {} avoid, {} road, {} slow, {} high-traffic, {} obstacle",
            count(ZoneKind::Avoid),
            count(ZoneKind::Road),
            count(ZoneKind::Slow),
            count(ZoneKind::HighTraffic),
            count(ZoneKind::Obstacle),
        );

        let path = out.join(format!("env-{seed}.json"));
        expertise_irl::envs::save_environment(&path, &Environment::ZoneGrid(env))?;
        println!("  saved -> {}", path.display());
    }
    Ok(())
}
