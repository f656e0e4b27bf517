//! Continuous joint inference: a grid-walk Metropolis-Hastings sampler over
//! `(theta, beta)` targeting the demonstration posterior.
//!
//! The chain perturbs one coordinate per step — a preference component by
//! `theta_step` or the temperature by `beta_step`, each direction equally
//! likely — and accepts with probability `min(1, exp(delta log-posterior))`.
//! Proposals are clamped to the search box, which biases the walk at the
//! boundary; this estimator reports means and a best-visited point, not a
//! calibrated posterior, so the bias is documented rather than corrected.
//!
//! Every iteration re-solves soft value iteration at the proposal,
//! warm-started from the current point's tables. A warm start that fails to
//! reach tolerance within its sweep budget falls back to a full solve, so
//! accept decisions always use converged values.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::mdp::{EpisodeSet, ExpertiseLevel, RewardWeights, TabularMdp};
use crate::seeds::rng_from;
use crate::solver::{
    set_log_likelihood, soft_value_iteration_warm, SoftSolution, SolverConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// Grid spacing of preference proposals.
    pub theta_step: f64,
    /// Grid spacing of temperature proposals.
    pub beta_step: f64,
    pub theta_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Iteration budget K.
    pub max_iterations: usize,
    pub burn_in_fraction: f64,
    /// Hard cap on the l1 norm of theta; `None` leaves only the box
    /// constraint (equivalent to a bound of `dim * theta_max`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity_bound: Option<f64>,
    /// Sweep budget for warm-started re-solves before falling back to a
    /// full solve.
    pub warm_start_sweep_cap: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            theta_step: 0.05,
            beta_step: 0.25,
            theta_max: 1.0,
            beta_min: 0.01,
            beta_max: 10.0,
            max_iterations: 1000,
            burn_in_fraction: 0.2,
            sparsity_bound: None,
            warm_start_sweep_cap: 50,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_step > 0.0 && self.beta_step > 0.0) {
            return Err(Error::Config("proposal steps must be positive".into()));
        }
        if !(self.theta_max > 0.0) {
            return Err(Error::Config("theta_max must be positive".into()));
        }
        if !(self.beta_min > 0.0 && self.beta_max > self.beta_min) {
            return Err(Error::Config(
                "need 0 < beta_min < beta_max for the temperature box".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn_in_fraction must lie in [0, 1)".into()));
        }
        if let Some(bound) = self.sparsity_bound {
            if !(bound > 0.0) {
                return Err(Error::Config("sparsity_bound must be positive".into()));
            }
        }
        Ok(())
    }

    fn l1_bound(&self, dim: usize) -> f64 {
        self.sparsity_bound
            .unwrap_or(dim as f64 * self.theta_max)
    }
}

/// Prior over the temperature. Preferences always take a uniform prior on
/// the `[0, theta_max]` box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BetaPrior {
    Uniform,
    /// A normal truncated to `[beta_min, beta_max]`.
    TruncatedNormal { mean: f64, std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub beta_prior: BetaPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        // Centered on the temperature box so no expertise level is favored
        // too strongly a priori.
        PriorSpec {
            beta_prior: BetaPrior::TruncatedNormal { mean: 5.005, std: 1.5 },
        }
    }
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl PriorSpec {
    /// Joint log density at `(theta, beta)`; negative infinity outside the
    /// support (the box, the l1 ball, and the temperature interval).
    pub fn log_density(&self, theta: &[f64], beta: f64, cfg: &McmcConfig) -> f64 {
        let inside_box = theta.iter().all(|&t| (0.0..=cfg.theta_max).contains(&t));
        let inside_l1 = theta.iter().sum::<f64>() <= cfg.l1_bound(theta.len()) + 1e-12;
        if !inside_box || !inside_l1 || !(cfg.beta_min..=cfg.beta_max).contains(&beta) {
            return f64::NEG_INFINITY;
        }
        let theta_term = -(theta.len() as f64) * cfg.theta_max.ln();
        let beta_term = match self.beta_prior {
            BetaPrior::Uniform => -(cfg.beta_max - cfg.beta_min).ln(),
            BetaPrior::TruncatedNormal { mean, std } => {
                let z = (beta - mean) / std;
                let mass = standard_normal_cdf((cfg.beta_max - mean) / std)
                    - standard_normal_cdf((cfg.beta_min - mean) / std);
                -0.5 * z * z
                    - std.ln()
                    - 0.5 * (2.0 * std::f64::consts::PI).ln()
                    - mass.ln()
            }
        };
        theta_term + beta_term
    }
}

/// One grid-walk proposal: either a single preference coordinate moves by
/// `±theta_step` or the temperature moves by `±beta_step`, clamped to the
/// box. Proposals breaking the l1 bound are redrawn a bounded number of
/// times, after which the current point is resubmitted as a self-proposal.
pub fn propose(
    theta: &[f64],
    beta: f64,
    cfg: &McmcConfig,
    rng: &mut impl Rng,
) -> (Vec<f64>, f64) {
    let bound = cfg.l1_bound(theta.len());
    for _ in 0..16 {
        let mut next_theta = theta.to_vec();
        let mut next_beta = beta;
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if rng.gen_bool(0.5) {
            next_beta = (beta + sign * cfg.beta_step).clamp(cfg.beta_min, cfg.beta_max);
        } else {
            let i = rng.gen_range(0..theta.len());
            next_theta[i] = (theta[i] + sign * cfg.theta_step).clamp(0.0, cfg.theta_max);
        }
        if next_theta.iter().sum::<f64>() <= bound + 1e-12 {
            return (next_theta, next_beta);
        }
    }
    (theta.to_vec(), beta)
}

/// Log posterior of `(theta, beta)` given the demonstrations, together with
/// the solved tables it was computed from.
pub fn log_posterior(
    mdp: &Arc<TabularMdp>,
    demos: &EpisodeSet,
    theta: &[f64],
    beta: f64,
    prior: &PriorSpec,
    cfg: &McmcConfig,
    solver: &SolverConfig,
    warm: Option<&SoftSolution>,
) -> Result<(f64, SoftSolution)> {
    let weights = RewardWeights::new(theta.to_vec())?;
    let level = ExpertiseLevel::new(beta)?;
    let sol = solve_to_tolerance(mdp, &weights, level, cfg, solver, warm)?.0;
    let log_prior = prior.log_density(theta, beta, cfg);
    if log_prior == f64::NEG_INFINITY {
        return Ok((f64::NEG_INFINITY, sol));
    }
    let ll = set_log_likelihood(&sol, demos)?;
    Ok((ll + log_prior, sol))
}

/// Warm-started solve honoring the fallback contract: a warm start that
/// misses tolerance within `warm_start_sweep_cap` sweeps triggers a full
/// cold solve, so the returned tables always satisfy the solver tolerance.
/// The flag reports whether the fallback fired.
fn solve_to_tolerance(
    mdp: &Arc<TabularMdp>,
    theta: &RewardWeights,
    beta: ExpertiseLevel,
    cfg: &McmcConfig,
    solver: &SolverConfig,
    warm: Option<&SoftSolution>,
) -> Result<(SoftSolution, bool)> {
    if let Some(prev) = warm {
        let capped = SolverConfig {
            max_sweeps: cfg.warm_start_sweep_cap,
            ..solver.clone()
        };
        let sol = soft_value_iteration_warm(mdp, theta, beta, &capped, Some(prev))?;
        if sol.converged {
            return Ok((sol, false));
        }
    }
    let sol = soft_value_iteration_warm(mdp, theta, beta, solver, None)?;
    Ok((sol, warm.is_some()))
}

/// The chain's state after one iteration, including the randomness that
/// drove the accept decision so the Metropolis rule can be replayed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainIteration {
    pub theta: Vec<f64>,
    pub beta: f64,
    pub log_posterior: f64,
    pub accepted: bool,
    /// The uniform draw compared against the acceptance probability.
    pub u: f64,
    /// Proposal log-posterior minus current log-posterior.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub initial_theta: Vec<f64>,
    pub initial_beta: f64,
    pub initial_log_posterior: f64,
    /// One record per iteration; on rejection the current point repeats.
    pub iterations: Vec<ChainIteration>,
    pub best_theta: Vec<f64>,
    pub best_beta: f64,
    pub best_log_posterior: f64,
    pub accepted: usize,
    /// Warm starts that missed tolerance and forced a full solve.
    pub warm_fallbacks: usize,
    pub burn_in_fraction: f64,
}

impl ChainResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations.is_empty() {
            return 0.0;
        }
        self.accepted as f64 / self.iterations.len() as f64
    }

    /// Number of leading samples discarded as burn-in.
    pub fn burn_in_len(&self) -> usize {
        (self.burn_in_fraction * self.iterations.len() as f64).floor() as usize
    }

    /// Arithmetic mean of the post-burn-in samples (the initial draw when
    /// the chain ran zero iterations).
    pub fn point_estimate(&self) -> Result<(RewardWeights, f64)> {
        if self.iterations.is_empty() {
            return Ok((RewardWeights::new(self.initial_theta.clone())?, self.initial_beta));
        }
        let kept = &self.iterations[self.burn_in_len()..];
        if kept.is_empty() {
            return Err(Error::Domain(
                "burn-in consumed every sample; lower burn_in_fraction or run longer".into(),
            ));
        }
        let dim = self.initial_theta.len();
        let mut theta = vec![0.0; dim];
        let mut beta = 0.0;
        for it in kept {
            for (acc, &t) in theta.iter_mut().zip(&it.theta) {
                *acc += t;
            }
            beta += it.beta;
        }
        let n = kept.len() as f64;
        theta.iter_mut().for_each(|t| *t /= n);
        Ok((RewardWeights::new(theta)?, beta / n))
    }
}

/// Run the sampler for `cfg.max_iterations` steps.
pub fn run_chain(
    mdp: &Arc<TabularMdp>,
    demos: &EpisodeSet,
    prior: &PriorSpec,
    cfg: &McmcConfig,
    solver: &SolverConfig,
) -> Result<ChainResult> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::Domain("cannot run the sampler on zero episodes".into()));
    }
    let dim = mdp.feature_dim();
    let bound = cfg.l1_bound(dim);
    let mut rng = rng_from(cfg.seed, &[]);

    // Initial point: uniform in the box (redrawn into the l1 ball), uniform
    // temperature.
    let mut theta = loop {
        let draw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..=cfg.theta_max)).collect();
        if draw.iter().sum::<f64>() <= bound + 1e-12 {
            break draw;
        }
    };
    let mut beta = rng.gen_range(cfg.beta_min..=cfg.beta_max);

    let (mut current_lp, mut current_sol) =
        log_posterior(mdp, demos, &theta, beta, prior, cfg, solver, None)?;

    let mut result = ChainResult {
        initial_theta: theta.clone(),
        initial_beta: beta,
        initial_log_posterior: current_lp,
        iterations: Vec::with_capacity(cfg.max_iterations),
        best_theta: theta.clone(),
        best_beta: beta,
        best_log_posterior: current_lp,
        accepted: 0,
        warm_fallbacks: 0,
        burn_in_fraction: cfg.burn_in_fraction,
    };

    for _ in 0..cfg.max_iterations {
        let (prop_theta, prop_beta) = propose(&theta, beta, cfg, &mut rng);
        let weights = RewardWeights::new(prop_theta.clone())?;
        let level = ExpertiseLevel::new(prop_beta)?;
        let (sol, fell_back) =
            solve_to_tolerance(mdp, &weights, level, cfg, solver, Some(&current_sol))?;
        result.warm_fallbacks += fell_back as usize;
        let prop_lp =
            set_log_likelihood(&sol, demos)? + prior.log_density(&prop_theta, prop_beta, cfg);

        let delta = prop_lp - current_lp;
        let u: f64 = rng.gen();
        let accepted = u < delta.exp().min(1.0);
        if accepted {
            theta = prop_theta;
            beta = prop_beta;
            current_lp = prop_lp;
            current_sol = sol;
            result.accepted += 1;
            if current_lp > result.best_log_posterior {
                result.best_log_posterior = current_lp;
                result.best_theta = theta.clone();
                result.best_beta = beta;
            }
        }
        result.iterations.push(ChainIteration {
            theta: theta.clone(),
            beta,
            log_posterior: current_lp,
            accepted,
            u,
            delta,
        });
    }
    Ok(result)
}

/// Write the trace as CSV: `iteration, theta_0..theta_{d-1}, beta,
/// log_posterior, accepted`.
pub fn export_chain_csv(path: impl AsRef<Path>, result: &ChainResult) -> Result<()> {
    let dim = result.initial_theta.len();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = ["iteration".to_string()]
        .into_iter()
        .chain((0..dim).map(|i| format!("theta_{i}")))
        .chain(["beta".into(), "log_posterior".into(), "accepted".into()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (k, it) in result.iterations.iter().enumerate() {
        let mut fields: Vec<String> = vec![(k + 1).to_string()];
        fields.extend(it.theta.iter().map(|v| v.to_string()));
        fields.push(it.beta.to_string());
        fields.push(it.log_posterior.to_string());
        fields.push((it.accepted as u8).to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
