//! Soft (maximum-entropy) value iteration and trajectory likelihoods.
//!
//! A demonstrator with weights `theta` and temperature `beta` follows the
//! Boltzmann policy of the soft fixed point
//!
//! ```text
//! Q(s, a) = theta . phi(s, a, s') + gamma * V(s')
//! V(s)    = beta * log sum_a exp(Q(s, a) / beta)
//! pi(a|s) = exp((Q(s, a) - V(s)) / beta)
//! ```
//!
//! As `beta -> 0` the soft maximum collapses onto the hard maximum and the
//! policy onto the optimal one; large `beta` approaches a uniform walk.
//! Sweeps are synchronous (Jacobi): all Q entries are refreshed from the old
//! V, then all V entries from the fresh Q. Every exponentiation goes through
//! the max-shift form, so temperatures at either extreme stay finite.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mdp::{EpisodeSet, ExpertiseLevel, RewardWeights, StateId, TabularMdp, Trajectory};
use crate::numeric::{argmax_set, log_softmax_scaled, smooth_max};

/// Below this temperature the soft backup is numerically identical to the
/// hard maximum, so the solver switches to hard-max V updates and a
/// greedy-tie-uniform policy instead of exponentiating `1/beta`.
pub const HARD_MAX_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Sweep-to-sweep sup-norm change below which iteration stops.
    pub tolerance: f64,
    /// Hard sweep budget; hitting it flags (not fails) the solution.
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

/// Converged (or best-effort) soft solution for one `(theta, beta)` pair.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    mdp: Arc<TabularMdp>,
    pub theta: RewardWeights,
    pub beta: ExpertiseLevel,
    q: Vec<Vec<f64>>,
    v: Vec<f64>,
    log_policy: Vec<Vec<f64>>,
    pub sweeps_used: usize,
    pub converged: bool,
    /// Sup-norm change recorded after each sweep; contraction makes this
    /// (weakly) decreasing, which the tests lean on.
    pub sweep_deltas: Vec<f64>,
    hard_mode: bool,
}

impl SoftSolution {
    pub fn mdp(&self) -> &Arc<TabularMdp> {
        &self.mdp
    }

    pub fn value(&self, s: StateId) -> f64 {
        self.v[s]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn q_row(&self, s: StateId) -> &[f64] {
        &self.q[s]
    }

    /// Log action probabilities at `s`, aligned with `mdp.actions(s)`.
    pub fn log_policy_row(&self, s: StateId) -> &[f64] {
        &self.log_policy[s]
    }

    /// Whether the sub-cutoff-temperature hard-max path was taken.
    pub fn is_hard_mode(&self) -> bool {
        self.hard_mode
    }
}

/// Solve the soft fixed point from a zero initialization.
pub fn soft_value_iteration(
    mdp: &Arc<TabularMdp>,
    theta: &RewardWeights,
    beta: ExpertiseLevel,
    cfg: &SolverConfig,
) -> Result<SoftSolution> {
    soft_value_iteration_warm(mdp, theta, beta, cfg, None)
}

/// Solve the soft fixed point, optionally starting from a previous solution's
/// tables. Warm starts only change how fast the contraction lands; the fixed
/// point itself is the same from any initialization.
pub fn soft_value_iteration_warm(
    mdp: &Arc<TabularMdp>,
    theta: &RewardWeights,
    beta: ExpertiseLevel,
    cfg: &SolverConfig,
    warm: Option<&SoftSolution>,
) -> Result<SoftSolution> {
    if theta.dim() != mdp.feature_dim() {
        return Err(Error::Config(format!(
            "weight dim {} does not match feature dim {}",
            theta.dim(),
            mdp.feature_dim()
        )));
    }
    if !(cfg.tolerance > 0.0) || cfg.max_sweeps == 0 {
        return Err(Error::Config(
            "solver needs a positive tolerance and at least one sweep".into(),
        ));
    }

    let n = mdp.num_states();
    let gamma = mdp.discount();
    let b = beta.beta();
    let hard_mode = b < HARD_MAX_CUTOFF;

    // Rewards are fixed for the whole solve; precompute them once.
    let rewards: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..mdp.actions(s).len())
                .map(|i| theta.dot(mdp.feature_at(s, i)))
                .collect()
        })
        .collect();

    let (mut q, mut v) = match warm {
        Some(prev) if prev.mdp.num_states() == n => (prev.q.clone(), prev.v.clone()),
        _ => (
            (0..n).map(|s| vec![0.0; mdp.actions(s).len()]).collect(),
            vec![0.0; n],
        ),
    };
    // Terminal rows must stay pinned at zero whatever the warm start held.
    for s in 0..n {
        if mdp.is_terminal(s) {
            q[s].iter_mut().for_each(|x| *x = 0.0);
            v[s] = 0.0;
        }
    }

    let mut q_next = q.clone();
    let mut v_next = v.clone();
    let mut sweep_deltas = Vec::new();
    let mut converged = false;
    let mut sweeps_used = 0;

    for _ in 0..cfg.max_sweeps {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            for i in 0..mdp.actions(s).len() {
                let next = mdp.successor_at(s, i);
                let nq = rewards[s][i] + gamma * v[next];
                delta = delta.max((nq - q[s][i]).abs());
                q_next[s][i] = nq;
            }
            let nv = if hard_mode {
                q_next[s].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                smooth_max(&q_next[s], b)
            };
            delta = delta.max((nv - v[s]).abs());
            v_next[s] = nv;
        }
        std::mem::swap(&mut q, &mut q_next);
        std::mem::swap(&mut v, &mut v_next);
        sweeps_used += 1;
        sweep_deltas.push(delta);
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }

    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(
            "soft value iteration produced non-finite values".into(),
        ));
    }

    let log_policy: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            if hard_mode {
                let ties = argmax_set(&q[s]);
                let lp = -(ties.len() as f64).ln();
                let mut row = vec![f64::NEG_INFINITY; q[s].len()];
                for i in ties {
                    row[i] = lp;
                }
                row
            } else {
                log_softmax_scaled(&q[s], b)
            }
        })
        .collect();

    Ok(SoftSolution {
        mdp: Arc::clone(mdp),
        theta: theta.clone(),
        beta,
        q,
        v,
        log_policy,
        sweeps_used,
        converged,
        sweep_deltas,
        hard_mode,
    })
}

/// Action probabilities at `s`, aligned with `mdp.actions(s)`.
pub fn maxent_policy(sol: &SoftSolution, s: StateId) -> Vec<f64> {
    sol.log_policy[s].iter().map(|&l| l.exp()).collect()
}

/// Log-probability of a whole demonstrated episode under the solved policy:
/// the sum over steps of `(Q(s, a) - V(s)) / beta`. Always <= 0.
pub fn trajectory_log_likelihood(sol: &SoftSolution, traj: &Trajectory) -> Result<f64> {
    let mut total = 0.0;
    for (i, &(s, a)) in traj.steps.iter().enumerate() {
        if s >= sol.mdp.num_states() {
            return Err(Error::Validation(format!(
                "step {i}: state {s} out of range"
            )));
        }
        let idx = sol.mdp.action_index(s, a).ok_or_else(|| {
            Error::Validation(format!("step {i}: action {a} is not admissible at state {s}"))
        })?;
        total += sol.log_policy[s][idx];
    }
    Ok(total)
}

/// Joint log-likelihood of an episode set: trajectories are conditionally
/// independent given `(theta, beta)`, so their log-probabilities add.
pub fn set_log_likelihood(sol: &SoftSolution, episodes: &EpisodeSet) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::Domain(
            "cannot score an empty episode set; provide at least one trajectory".into(),
        ));
    }
    let mut total = 0.0;
    for traj in &episodes.trajectories {
        total += trajectory_log_likelihood(sol, traj)?;
    }
    Ok(total)
}
