//! Core tabular-MDP vocabulary shared by every other module.
//!
//! States and actions are dense integer ids. Dynamics are deterministic:
//! each admissible action at a state maps to exactly one successor.
//! Rewards are linear in a per-transition feature vector,
//! `r(s, a, s') = theta . phi(s, a, s')`, so a demonstrator is fully
//! described by its weights `theta` and its temperature `beta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;

/// Feature vector attached to one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Non-negative linear reward weights, one entry per feature component.
///
/// Feature signs carry the penalty/bonus semantics, so weights only express
/// how much each aspect matters, never in which direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RewardWeights(Vec<f64>);

impl RewardWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("reward weights must not be empty".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!(
                    "reward weight {i} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(RewardWeights(weights))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Scale so the weights sum to 1. Errors on an all-zero vector, which
    /// has no preference direction at all.
    pub fn l1_normalized(&self) -> Result<Self> {
        let total: f64 = self.0.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain(
                "cannot normalize an all-zero weight vector".into(),
            ));
        }
        Ok(RewardWeights(self.0.iter().map(|w| w / total).collect()))
    }

    pub fn dot(&self, phi: &FeatureVector) -> f64 {
        debug_assert_eq!(self.dim(), phi.dim());
        self.0.iter().zip(&phi.0).map(|(w, f)| w * f).sum()
    }
}

impl TryFrom<Vec<f64>> for RewardWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        RewardWeights::new(v)
    }
}

impl From<RewardWeights> for Vec<f64> {
    fn from(w: RewardWeights) -> Self {
        w.0
    }
}

/// MaxEnt temperature `beta > 0`.
///
/// Small values mean near-optimal behaviour (high expertise); large values
/// approach a uniform random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExpertiseLevel(f64);

impl ExpertiseLevel {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::Domain(format!(
                "expertise temperature must be finite and positive, got {beta}"
            )));
        }
        Ok(ExpertiseLevel(beta))
    }

    pub fn beta(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ExpertiseLevel {
    type Error = Error;
    fn try_from(b: f64) -> Result<Self> {
        ExpertiseLevel::new(b)
    }
}

impl From<ExpertiseLevel> for f64 {
    fn from(e: ExpertiseLevel) -> f64 {
        e.0
    }
}

/// One demonstrated episode: the visited (state, action) pairs in order.
/// The terminal state reached at the end, if any, is not recorded as a step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(StateId, ActionId)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(StateId, ActionId)>) -> Self {
        Trajectory { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A bag of trajectories demonstrated by one actor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeSet {
    pub trajectories: Vec<Trajectory>,
}

impl EpisodeSet {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        EpisodeSet { trajectories }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// The first `n` episodes, used when evaluating along a schedule.
    pub fn prefix(&self, n: usize) -> EpisodeSet {
        EpisodeSet {
            trajectories: self.trajectories.iter().take(n).cloned().collect(),
        }
    }

    pub fn mean_length(&self) -> f64 {
        if self.trajectories.is_empty() {
            return 0.0;
        }
        let total: usize = self.trajectories.iter().map(|t| t.len()).sum();
        total as f64 / self.trajectories.len() as f64
    }
}

/// Finite deterministic MDP with per-transition features.
///
/// The three per-state tables (`actions`, `successors`, `features`) are
/// parallel: entry `i` of each describes the same admissible action.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    actions: Vec<Vec<ActionId>>,
    successors: Vec<Vec<StateId>>,
    features: Vec<Vec<FeatureVector>>,
    terminal: Vec<bool>,
    discount: f64,
    feature_dim: usize,
}

impl TabularMdp {
    /// Build and validate. Terminal states must be absorbing self-loops with
    /// all-zero features so that "episode over" really means no more reward.
    pub fn new(
        actions: Vec<Vec<ActionId>>,
        successors: Vec<Vec<StateId>>,
        features: Vec<Vec<FeatureVector>>,
        terminal: Vec<bool>,
        discount: f64,
    ) -> Result<Self> {
        let n = actions.len();
        if successors.len() != n || features.len() != n || terminal.len() != n {
            return Err(Error::Config(format!(
                "mismatched table lengths: {} actions, {} successors, {} features, {} terminal flags",
                n,
                successors.len(),
                features.len(),
                terminal.len()
            )));
        }
        if n == 0 {
            return Err(Error::Config("an MDP needs at least one state".into()));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::Config(format!(
                "discount must lie strictly inside (0, 1), got {discount}"
            )));
        }
        let feature_dim = features
            .first()
            .and_then(|row| row.first())
            .map(|phi| phi.dim())
            .ok_or_else(|| Error::Config("state 0 has no admissible actions".into()))?;

        for s in 0..n {
            let k = actions[s].len();
            if k == 0 {
                return Err(Error::Config(format!("state {s} has no admissible actions")));
            }
            if successors[s].len() != k || features[s].len() != k {
                return Err(Error::Config(format!(
                    "state {s}: action/successor/feature rows disagree in length"
                )));
            }
            for i in 0..k {
                let next = successors[s][i];
                if next >= n {
                    return Err(Error::Config(format!(
                        "state {s} action {} points at nonexistent state {next}",
                        actions[s][i]
                    )));
                }
                let phi = &features[s][i];
                if phi.dim() != feature_dim {
                    return Err(Error::Config(format!(
                        "state {s} action {}: feature dim {} != {}",
                        actions[s][i],
                        phi.dim(),
                        feature_dim
                    )));
                }
                if phi.0.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "non-finite feature on transition ({s}, {}, {next})",
                        actions[s][i]
                    )));
                }
                if terminal[s] && (next != s || !phi.is_zero()) {
                    return Err(Error::Config(format!(
                        "terminal state {s} must self-loop with zero features"
                    )));
                }
            }
        }
        Ok(TabularMdp {
            actions,
            successors,
            features,
            terminal,
            discount,
            feature_dim,
        })
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    /// Admissible action ids at `s`, in table order.
    pub fn actions(&self, s: StateId) -> &[ActionId] {
        &self.actions[s]
    }

    /// Position of action id `a` within the admissible list at `s`.
    pub fn action_index(&self, s: StateId, a: ActionId) -> Option<usize> {
        self.actions[s].iter().position(|&x| x == a)
    }

    /// Successor by table position (not action id).
    pub fn successor_at(&self, s: StateId, idx: usize) -> StateId {
        self.successors[s][idx]
    }

    /// Feature vector by table position (not action id).
    pub fn feature_at(&self, s: StateId, idx: usize) -> &FeatureVector {
        &self.features[s][idx]
    }

    /// Successor of taking action id `a` at `s`.
    pub fn successor(&self, s: StateId, a: ActionId) -> Result<StateId> {
        let idx = self.action_index(s, a).ok_or_else(|| {
            Error::Validation(format!("action {a} is not admissible at state {s}"))
        })?;
        Ok(self.successors[s][idx])
    }

    pub fn non_terminal_states(&self) -> Vec<StateId> {
        (0..self.num_states()).filter(|&s| !self.terminal[s]).collect()
    }
}

/// Reward `theta . phi(s, a, s')` of taking action id `a` at `s`.
pub fn reward_of_transition(
    mdp: &TabularMdp,
    theta: &RewardWeights,
    s: StateId,
    a: ActionId,
) -> Result<f64> {
    if theta.dim() != mdp.feature_dim() {
        return Err(Error::Config(format!(
            "weight dim {} does not match feature dim {}",
            theta.dim(),
            mdp.feature_dim()
        )));
    }
    if s >= mdp.num_states() {
        return Err(Error::Validation(format!("state {s} out of range")));
    }
    let idx = mdp
        .action_index(s, a)
        .ok_or_else(|| Error::Validation(format!("action {a} is not admissible at state {s}")))?;
    Ok(theta.dot(mdp.feature_at(s, idx)))
}

/// Check that every step names a real state, an admissible action, and that
/// consecutive steps follow the deterministic dynamics.
pub fn validate_trajectory(mdp: &TabularMdp, traj: &Trajectory) -> Result<()> {
    for (i, &(s, a)) in traj.steps.iter().enumerate() {
        if s >= mdp.num_states() {
            return Err(Error::Validation(format!(
                "step {i}: state {s} out of range (have {})",
                mdp.num_states()
            )));
        }
        let next = mdp.successor(s, a).map_err(|_| {
            Error::Validation(format!("step {i}: action {a} is not admissible at state {s}"))
        })?;
        if let Some(&(s2, _)) = traj.steps.get(i + 1) {
            if s2 != next {
                return Err(Error::Validation(format!(
                    "step {i}: dynamics give successor {next} but the trajectory continues at {s2}"
                )));
            }
        }
    }
    Ok(())
}

/// Two-state chain used across the crate's unit tests: s0 has two actions,
/// both leading to terminal s1; action 0 carries feature [1], action 1
/// carries feature [0].
#[cfg(test)]
pub(crate) fn two_state_chain(discount: f64) -> TabularMdp {
    TabularMdp::new(
        vec![vec![0, 1], vec![0, 1]],
        vec![vec![1, 1], vec![1, 1]],
        vec![
            vec![FeatureVector(vec![1.0]), FeatureVector(vec![0.0])],
            vec![FeatureVector::zeros(1), FeatureVector::zeros(1)],
        ],
        vec![false, true],
        discount,
    )
    .expect("fixture must build")
}
