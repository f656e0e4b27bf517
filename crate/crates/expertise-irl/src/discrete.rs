//! Discrete-hypothesis joint inference: a Bayesian filter over a finite set
//! of candidate `(theta, beta)` pairs.
//!
//! The hypothesis space is a cross product `Psi = Theta x B`. The belief
//! lives entirely in log space and is renormalized with log-sum-exp after
//! every update; posterior products over hundreds of observed actions
//! underflow in probability space. Soft value iteration runs at most once
//! per pair, cached and shared between beliefs, so streaming updates cost
//! one table lookup per hypothesis per observation.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    validate_trajectory, ActionId, EpisodeSet, ExpertiseLevel, RewardWeights, StateId, TabularMdp,
    Trajectory,
};
use crate::numeric::logsumexp;
use crate::seeds::rng_from;
use crate::solver::{
    soft_value_iteration, trajectory_log_likelihood, SoftSolution, SolverConfig,
};

/// Likelihood increments this far below zero at the best hypothesis are
/// counted as underflow warnings: the evidence is barely representable,
/// though the normalized posterior is still well-defined.
pub const UNDERFLOW_WARNING_THRESHOLD: f64 = -700.0;

/// Recipe for a hypothesis set, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSetSpec {
    /// Values each preference component may take before normalization.
    pub component_values: Vec<f64>,
    pub dim: usize,
    pub betas: Vec<f64>,
    /// Sample this many preference vectors uniformly without replacement
    /// (seeded); `None` keeps the whole grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_k: Option<usize>,
    /// Merge preference vectors that normalize to the same point. Off by
    /// default: the raw grid count is what downstream set sizes refer to.
    #[serde(default)]
    pub dedupe: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for HypothesisSetSpec {
    fn default() -> Self {
        HypothesisSetSpec {
            component_values: vec![0.0, 0.3, 0.5, 0.7, 1.0],
            dim: 5,
            betas: vec![0.01, 0.09, 0.5, 1.0, 5.0, 10.0],
            sample_k: None,
            dedupe: false,
            seed: 0,
        }
    }
}

/// A finite joint hypothesis space: every `(theta, beta)` with
/// `theta` from `thetas` and `beta` from `betas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub thetas: Vec<RewardWeights>,
    pub betas: Vec<ExpertiseLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_k: Option<usize>,
}

impl HypothesisSet {
    pub fn new(thetas: Vec<RewardWeights>, betas: Vec<ExpertiseLevel>) -> Result<Self> {
        if thetas.is_empty() || betas.is_empty() {
            return Err(Error::Config(
                "a hypothesis set needs at least one theta and one beta".into(),
            ));
        }
        let dim = thetas[0].dim();
        if thetas.iter().any(|t| t.dim() != dim) {
            return Err(Error::Config(
                "all preference vectors in a hypothesis set must share one dimension".into(),
            ));
        }
        Ok(HypothesisSet { thetas, betas, seed: None, sampled_k: None })
    }

    /// Number of `(theta, beta)` pairs.
    pub fn len(&self) -> usize {
        self.thetas.len() * self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees both axes are non-empty
    }

    pub fn theta_dim(&self) -> usize {
        self.thetas[0].dim()
    }

    /// The pair at flat index `i`, ordered theta-major.
    pub fn pair(&self, i: usize) -> (&RewardWeights, ExpertiseLevel) {
        let b = self.betas.len();
        (&self.thetas[i / b], self.betas[i % b])
    }

    /// Collapse the preference axis to a single vector, keeping all betas.
    pub fn with_fixed_theta(&self, theta: RewardWeights) -> HypothesisSet {
        HypothesisSet {
            thetas: vec![theta],
            betas: self.betas.clone(),
            seed: self.seed,
            sampled_k: None,
        }
    }

    /// Collapse the expertise axis to a single level, keeping all thetas.
    pub fn with_fixed_beta(&self, beta: ExpertiseLevel) -> HypothesisSet {
        HypothesisSet {
            thetas: self.thetas.clone(),
            betas: vec![beta],
            seed: self.seed,
            sampled_k: self.sampled_k,
        }
    }
}

/// The normalized preference grid: every `dim`-fold combination of
/// `component_values` except the all-zero vector, each l1-normalized.
/// Distinct combinations that normalize to the same vector are kept
/// unless `dedupe` is set.
pub fn theta_grid(component_values: &[f64], dim: usize, dedupe: bool) -> Result<Vec<RewardWeights>> {
    if component_values.is_empty() || dim == 0 {
        return Err(Error::Config(
            "component_values and dim must both be non-empty".into(),
        ));
    }
    if !component_values.iter().any(|&v| v > 0.0) {
        return Err(Error::Config(
            "component_values needs at least one positive entry".into(),
        ));
    }
    for &v in component_values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Config(format!(
                "component values must be finite and non-negative, got {v}"
            )));
        }
    }

    let n = component_values.len();
    let count = n.checked_pow(dim as u32).ok_or_else(|| {
        Error::Config(format!("{n}^{dim} combinations overflow; shrink the grid"))
    })?;
    let mut grid = Vec::with_capacity(count - 1);
    let mut seen = std::collections::HashSet::new();
    for mut code in 0..count {
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            v.push(component_values[code % n]);
            code /= n;
        }
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        let theta = RewardWeights::new(v)?.l1_normalized()?;
        if dedupe {
            // Quantized key: vectors that agree to 12 decimals are one point.
            let key: Vec<i64> = theta
                .as_slice()
                .iter()
                .map(|&x| (x * 1e12).round() as i64)
                .collect();
            if !seen.insert(key) {
                continue;
            }
        }
        grid.push(theta);
    }
    Ok(grid)
}

/// Uniform sample of `k` vectors without replacement, in grid order.
pub fn sample_thetas(grid: &[RewardWeights], k: usize, seed: u64) -> Result<Vec<RewardWeights>> {
    if k == 0 || k > grid.len() {
        return Err(Error::Domain(format!(
            "cannot sample {k} vectors from a grid of {}",
            grid.len()
        )));
    }
    let mut rng = rng_from(seed, &[]);
    let mut idx = sample_indices(&mut rng, grid.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| grid[i].clone()).collect())
}

/// Materialize the hypothesis set described by `spec`.
pub fn build_hypothesis_set(spec: &HypothesisSetSpec) -> Result<HypothesisSet> {
    let grid = theta_grid(&spec.component_values, spec.dim, spec.dedupe)?;
    let thetas = match spec.sample_k {
        Some(k) => sample_thetas(&grid, k, spec.seed)?,
        None => grid,
    };
    let betas = spec
        .betas
        .iter()
        .map(|&b| ExpertiseLevel::new(b))
        .collect::<Result<Vec<_>>>()?;
    let mut set = HypothesisSet::new(thetas, betas)?;
    set.seed = Some(spec.seed);
    set.sampled_k = spec.sample_k;
    Ok(set)
}

pub fn save_hypothesis_set(path: impl AsRef<Path>, set: &HypothesisSet) -> Result<()> {
    let mut text = serde_json::to_string_pretty(set)
        .map_err(|e| Error::Numeric(format!("hypothesis set serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_hypothesis_set(path: impl AsRef<Path>) -> Result<HypothesisSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let set: HypothesisSet = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    HypothesisSet::new(set.thetas.clone(), set.betas.clone())?;
    Ok(set)
}

/// Lazily solved value tables, one per hypothesis pair, shared between all
/// beliefs over the same set. Each pair is solved at most once per process
/// (modulo a benign race that recomputes the same deterministic tables).
pub struct SolutionCache {
    mdp: Arc<TabularMdp>,
    set: Arc<HypothesisSet>,
    solver: SolverConfig,
    slots: Vec<OnceLock<SoftSolution>>,
}

impl SolutionCache {
    pub fn new(mdp: Arc<TabularMdp>, set: Arc<HypothesisSet>, solver: SolverConfig) -> Result<Self> {
        if set.theta_dim() != mdp.feature_dim() {
            return Err(Error::Config(format!(
                "hypothesis vectors have dimension {} but the environment has {} features",
                set.theta_dim(),
                mdp.feature_dim()
            )));
        }
        let slots = (0..set.len()).map(|_| OnceLock::new()).collect();
        Ok(SolutionCache { mdp, set, solver, slots })
    }

    pub fn mdp(&self) -> &Arc<TabularMdp> {
        &self.mdp
    }

    pub fn set(&self) -> &Arc<HypothesisSet> {
        &self.set
    }

    /// The solved tables for pair `i`, solving on first use.
    pub fn get(&self, i: usize) -> Result<&SoftSolution> {
        if let Some(sol) = self.slots[i].get() {
            return Ok(sol);
        }
        let (theta, beta) = self.set.pair(i);
        let sol = soft_value_iteration(&self.mdp, theta, beta, &self.solver)?;
        Ok(self.slots[i].get_or_init(|| sol))
    }

    /// Solve every pair, in parallel across hypotheses.
    pub fn ensure_all(&self) -> Result<()> {
        (0..self.set.len())
            .into_par_iter()
            .try_for_each(|i| self.get(i).map(|_| ()))
    }

    /// Check that every cached solution belongs to its pair.
    pub fn verify(&self) -> Result<()> {
        for (i, slot) in self.slots.iter().enumerate() {
            if let Some(sol) = slot.get() {
                let (theta, beta) = self.set.pair(i);
                if sol.theta.as_slice() != theta.as_slice() || sol.beta.beta() != beta.beta() {
                    return Err(Error::Numeric(format!(
                        "solution cache slot {i} holds tables for the wrong hypothesis"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A normalized belief over a hypothesis set, in log space.
///
/// Updates return new beliefs; the solved-tables cache is shared, so
/// forking a prior into several posteriors costs only the belief vector.
#[derive(Clone)]
pub struct HypothesisBelief {
    cache: Arc<SolutionCache>,
    pub log_belief: Vec<f64>,
    /// Updates whose best hypothesis barely avoided log-space underflow.
    pub underflow_events: usize,
}

impl std::fmt::Debug for HypothesisBelief {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HypothesisBelief")
            .field("hypotheses", &self.log_belief.len())
            .field("underflow_events", &self.underflow_events)
            .finish()
    }
}

/// The uniform prior over a hypothesis set.
pub fn init_belief(
    mdp: Arc<TabularMdp>,
    set: Arc<HypothesisSet>,
    solver: SolverConfig,
) -> Result<HypothesisBelief> {
    let cache = Arc::new(SolutionCache::new(mdp, set, solver)?);
    Ok(HypothesisBelief::uniform(cache))
}

impl HypothesisBelief {
    pub fn uniform(cache: Arc<SolutionCache>) -> Self {
        let n = cache.set().len();
        HypothesisBelief {
            cache,
            log_belief: vec![-(n as f64).ln(); n],
            underflow_events: 0,
        }
    }

    pub fn set(&self) -> &Arc<HypothesisSet> {
        self.cache.set()
    }

    pub fn cache(&self) -> &Arc<SolutionCache> {
        &self.cache
    }

    fn apply_increments(&self, increments: &[f64], what: &str) -> Result<HypothesisBelief> {
        let mut next: Vec<f64> = self
            .log_belief
            .iter()
            .zip(increments)
            .map(|(b, inc)| b + inc)
            .collect();
        let lse = logsumexp(&next);
        if !lse.is_finite() {
            return Err(Error::DegenerateEvidence(format!(
                "every hypothesis assigns zero probability to the observed {what}"
            )));
        }
        for v in &mut next {
            *v -= lse;
        }
        let best = increments.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let underflow = (best < UNDERFLOW_WARNING_THRESHOLD) as usize;
        Ok(HypothesisBelief {
            cache: Arc::clone(&self.cache),
            log_belief: next,
            underflow_events: self.underflow_events + underflow,
        })
    }

    /// Bayes update on one whole trajectory.
    pub fn update_with_trajectory(&self, traj: &Trajectory) -> Result<HypothesisBelief> {
        validate_trajectory(self.cache.mdp(), traj)?;
        let increments = (0..self.set().len())
            .into_par_iter()
            .map(|i| trajectory_log_likelihood(self.cache.get(i)?, traj))
            .collect::<Result<Vec<f64>>>()?;
        self.apply_increments(&increments, "trajectory")
    }

    /// Bayes update on a single observed action.
    pub fn update_with_action(&self, s: StateId, a: ActionId) -> Result<HypothesisBelief> {
        let mdp = self.cache.mdp();
        let idx = mdp.action_index(s, a).ok_or_else(|| {
            Error::Validation(format!("action {a} is not admissible in state {s}"))
        })?;
        let increments = (0..self.set().len())
            .into_par_iter()
            .map(|i| Ok(self.cache.get(i)?.log_policy_row(s)[idx]))
            .collect::<Result<Vec<f64>>>()?;
        self.apply_increments(&increments, "action")
    }

    /// Fold a whole episode set into the belief, one trajectory at a time.
    pub fn update_with_episodes(&self, episodes: &EpisodeSet) -> Result<HypothesisBelief> {
        if episodes.is_empty() {
            return Err(Error::Domain("cannot update on an empty episode set".into()));
        }
        let mut belief = self.clone();
        for traj in &episodes.trajectories {
            belief = belief.update_with_trajectory(traj)?;
        }
        Ok(belief)
    }

    /// Marginal probability of each preference vector.
    pub fn theta_marginal(&self) -> Vec<f64> {
        let b = self.set().betas.len();
        self.log_belief
            .chunks(b)
            .map(|row| logsumexp(row).exp())
            .collect()
    }

    /// Marginal probability of each expertise level.
    pub fn beta_marginal(&self) -> Vec<f64> {
        let b = self.set().betas.len();
        (0..b)
            .map(|j| {
                let col: Vec<f64> = self.log_belief.iter().skip(j).step_by(b).cloned().collect();
                logsumexp(&col).exp()
            })
            .collect()
    }

    /// Marginal-expectation point estimates: the belief-weighted means of
    /// the two axes.
    pub fn point_estimates(&self) -> (RewardWeights, f64) {
        let set = self.set();
        let p_theta = self.theta_marginal();
        let mut theta_hat = vec![0.0; set.theta_dim()];
        for (theta, p) in set.thetas.iter().zip(&p_theta) {
            for (acc, &w) in theta_hat.iter_mut().zip(theta.as_slice()) {
                *acc += p * w;
            }
        }
        let beta_hat = self
            .beta_marginal()
            .iter()
            .zip(&set.betas)
            .map(|(p, b)| p * b.beta())
            .sum();
        let theta_hat = RewardWeights::new(theta_hat)
            .expect("a convex combination of valid weights is valid");
        (theta_hat, beta_hat)
    }

    /// The single most probable pair.
    pub fn map_hypothesis(&self) -> (usize, &RewardWeights, ExpertiseLevel) {
        let i = self
            .log_belief
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("belief vectors are never empty");
        let (theta, beta) = self.set().pair(i);
        (i, theta, beta)
    }

    /// Posterior probability of a specific pair index.
    pub fn probability_of(&self, i: usize) -> f64 {
        self.log_belief[i].exp()
    }
}

/// Write the belief as CSV: `theta_0..theta_{d-1}, beta, belief`.
pub fn export_belief_csv(path: impl AsRef<Path>, belief: &HypothesisBelief) -> Result<()> {
    let set = belief.set();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (0..set.theta_dim())
        .map(|i| format!("theta_{i}"))
        .chain(["beta".into(), "belief".into()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (i, lb) in belief.log_belief.iter().enumerate() {
        let (theta, beta) = set.pair(i);
        let mut fields: Vec<String> = theta.as_slice().iter().map(|v| v.to_string()).collect();
        fields.push(beta.beta().to_string());
        fields.push(lb.exp().to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
