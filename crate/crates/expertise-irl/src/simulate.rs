//! A simulated demonstrator: rolls out the softmax policy of a ground-truth
//! `(theta*, beta*)` pair to produce demonstration episodes.
//!
//! Each episode gets its own RNG stream derived from `(seed, episode index)`,
//! so extending a set never perturbs the episodes already in it.

use std::sync::Arc;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{EpisodeSet, ExpertiseLevel, RewardWeights, StateId, TabularMdp, Trajectory};
use crate::seeds::rng_from;
use crate::solver::{maxent_policy, soft_value_iteration, SoftSolution, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    pub num_episodes: usize,
    /// Episodes are cut after this many steps; capped episodes are kept,
    /// since a truncated path is still valid likelihood evidence.
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: usize,
    pub seed: u64,
}

fn default_horizon_cap() -> usize {
    500
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            num_episodes: 20,
            horizon_cap: default_horizon_cap(),
            seed: 0,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_episodes == 0 {
            return Err(Error::Config("num_episodes must be at least 1".into()));
        }
        if self.horizon_cap == 0 {
            return Err(Error::Config("horizon_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Demonstrations plus the solved policy they were sampled from.
#[derive(Debug, Clone)]
pub struct SimulatedDemos {
    pub episodes: EpisodeSet,
    pub solution: SoftSolution,
    /// Set when the solver ran out of sweeps before reaching tolerance;
    /// the episodes are still usable, but the policy is approximate.
    pub warning: Option<String>,
}

/// Roll the policy of `sol` forward from `start` until a terminal state or
/// the step cap. The terminal state itself is not recorded as a step.
pub fn sample_episode(
    sol: &SoftSolution,
    start: StateId,
    horizon_cap: usize,
    rng: &mut impl Rng,
) -> Trajectory {
    let mdp = sol.mdp();
    let mut steps = Vec::new();
    let mut s = start;
    while !mdp.is_terminal(s) && steps.len() < horizon_cap {
        let probs = maxent_policy(sol, s);
        let idx = WeightedIndex::new(&probs)
            .expect("policy rows are normalized and non-negative")
            .sample(rng);
        let action = mdp.actions(s)[idx];
        steps.push((s, action));
        s = mdp.successor_at(s, idx);
    }
    Trajectory::new(steps)
}

/// Solve soft value iteration once for `(theta, beta)` and sample
/// `cfg.num_episodes` episodes from uniformly random non-terminal starts.
pub fn generate_episode_set(
    mdp: &Arc<TabularMdp>,
    theta: &RewardWeights,
    beta: ExpertiseLevel,
    cfg: &SimulatorConfig,
) -> Result<SimulatedDemos> {
    generate_episode_set_with(mdp, theta, beta, cfg, &SolverConfig::default())
}

pub fn generate_episode_set_with(
    mdp: &Arc<TabularMdp>,
    theta: &RewardWeights,
    beta: ExpertiseLevel,
    cfg: &SimulatorConfig,
    solver_cfg: &SolverConfig,
) -> Result<SimulatedDemos> {
    cfg.validate()?;
    let starts = mdp.non_terminal_states();
    if starts.is_empty() {
        return Err(Error::Domain(
            "every state is terminal; there is nothing to demonstrate".into(),
        ));
    }
    let solution = soft_value_iteration(mdp, theta, beta, solver_cfg)?;
    let warning = if solution.converged {
        None
    } else {
        Some(format!(
            "value iteration stopped after {} sweeps above tolerance; \
             demonstrations follow the unconverged policy",
            solution.sweeps_used
        ))
    };

    let mut trajectories = Vec::with_capacity(cfg.num_episodes);
    for episode in 0..cfg.num_episodes {
        let mut rng = rng_from(cfg.seed, &[episode as u64]);
        let start = starts[rng.gen_range(0..starts.len())];
        trajectories.push(sample_episode(&solution, start, cfg.horizon_cap, &mut rng));
    }
    Ok(SimulatedDemos {
        episodes: EpisodeSet::new(trajectories),
        solution,
        warning,
    })
}
