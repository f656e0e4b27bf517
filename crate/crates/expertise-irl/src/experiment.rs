//! The condition-comparison harness: sample ground truth, simulate
//! demonstrators, run one or both inference back-ends on a schedule of
//! episode budgets, and record every estimate with its metrics as one CSV
//! row. Instances are independent, seeded hierarchically from the master
//! seed (master → environment → run → set size → expertise group), so any
//! slice of an experiment reruns bit-identically on its own.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{init_belief, sample_thetas, theta_grid, HypothesisSet};
use crate::envs::{generate_environment, load_environment, Environment, GenerationConfig, Model};
use crate::error::{Error, Result};
use crate::mcmc::{run_chain, McmcConfig, PriorSpec};
use crate::mdp::{EpisodeSet, ExpertiseLevel, RewardWeights};
use crate::metrics::{expertise_distance, policy_regret, preference_similarity, pearson};
use crate::seeds::{derive_seed, rng_from};
use crate::simulate::{generate_episode_set_with, SimulatorConfig};
use crate::solver::SolverConfig;

/// Seed channels, so each consumer of randomness gets its own stream.
const CH_ENV: u64 = 1;
const CH_HYP: u64 = 2;
const CH_TRUTH: u64 = 3;
const CH_ASSUMPTION: u64 = 4;
const CH_DEMOS: u64 = 5;
const CH_OUT_TRUTH: u64 = 6;
const CH_OUT_DEMOS: u64 = 7;
const CH_MCMC: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Joint inference over the full hypothesis set Θ_k × B.
    FullSet,
    /// Preferences pinned to a wrong vector; only expertise is inferred.
    FixedTheta,
    /// Expertise pinned to a wrong level (from the opposite group); only
    /// preferences are inferred.
    FixedBeta,
    /// Joint inference, but the truth is drawn from outside the set.
    OutOfSet,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::FullSet,
        Condition::FixedTheta,
        Condition::FixedBeta,
        Condition::OutOfSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::FullSet => "full_set",
            Condition::FixedTheta => "fixed_theta",
            Condition::FixedBeta => "fixed_beta",
            Condition::OutOfSet => "out_of_set",
        }
    }

    fn index(self) -> u64 {
        Condition::ALL.iter().position(|&c| c == self).unwrap() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackEnd {
    Discrete,
    Mcmc,
}

impl BackEnd {
    pub fn name(self) -> &'static str {
        match self {
            BackEnd::Discrete => "discrete",
            BackEnd::Mcmc => "mcmc",
        }
    }
}

/// Where the environments come from: generated on the spot, or loaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentsSpec {
    Count { count: usize },
    Files { files: Vec<PathBuf> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpertiseGroup {
    pub name: String,
    pub betas: Vec<f64>,
}

fn default_expertise_groups() -> Vec<ExpertiseGroup> {
    vec![
        ExpertiseGroup { name: "high".into(), betas: vec![0.01, 0.09] },
        ExpertiseGroup { name: "medium".into(), betas: vec![0.5, 1.0] },
        ExpertiseGroup { name: "low".into(), betas: vec![5.0, 10.0] },
    ]
}

/// How hypothesis sets are built: the component grid Θ plus the sizes k of
/// the subsets Θ_k sampled from it (one experiment axis per size).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub component_values: Vec<f64>,
    pub dim: usize,
    pub k_values: Vec<usize>,
    pub betas: Vec<f64>,
    pub dedupe: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            component_values: vec![0.0, 0.3, 0.5, 0.7, 1.0],
            dim: 5,
            k_values: vec![5, 10, 15, 20],
            betas: vec![0.01, 0.09, 0.5, 1.0, 5.0, 10.0],
            dedupe: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub environments: EnvironmentsSpec,
    pub runs: usize,
    pub hypotheses: GridSpec,
    pub conditions: Vec<Condition>,
    pub expertise_groups: Vec<ExpertiseGroup>,
    /// Episode budgets at which estimates are taken; strictly increasing.
    pub schedule: Vec<usize>,
    pub back_ends: Vec<BackEnd>,
    /// Interval for the out-of-set condition's true temperature.
    pub out_of_set_beta_interval: (f64, f64),
    pub horizon_cap: usize,
    pub discount: f64,
    pub mcmc: McmcConfig,
    pub solver: SolverConfig,
    pub prior: PriorSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environments: EnvironmentsSpec::Count { count: 2 },
            runs: 2,
            hypotheses: GridSpec::default(),
            conditions: vec![Condition::FullSet],
            expertise_groups: default_expertise_groups(),
            schedule: vec![5, 10, 15, 20],
            back_ends: vec![BackEnd::Discrete],
            out_of_set_beta_interval: (0.01, 10.0),
            horizon_cap: 500,
            discount: 0.95,
            mcmc: McmcConfig::default(),
            solver: SolverConfig::default(),
            prior: PriorSpec::default(),
            seed: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.environments {
            EnvironmentsSpec::Count { count } if *count == 0 => {
                return Err(Error::Config("environment count must be at least 1".into()));
            }
            EnvironmentsSpec::Files { files } => {
                if files.is_empty() {
                    return Err(Error::Config("environment file list is empty".into()));
                }
                for f in files {
                    if !f.exists() {
                        return Err(Error::Config(format!(
                            "environment file {} does not exist",
                            f.display()
                        )));
                    }
                }
            }
            _ => {}
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("at least one condition is required".into()));
        }
        if self.expertise_groups.is_empty()
            || self.expertise_groups.iter().any(|g| g.betas.is_empty())
        {
            return Err(Error::Config("expertise groups must be non-empty".into()));
        }
        for g in &self.expertise_groups {
            for &b in &g.betas {
                if !b.is_finite() || b <= 0.0 {
                    return Err(Error::Config(format!(
                        "expertise group {} has invalid temperature {b}",
                        g.name
                    )));
                }
            }
        }
        if self.schedule.is_empty() || self.schedule[0] == 0 {
            return Err(Error::Config("schedule needs at least one positive budget".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("schedule must be strictly increasing".into()));
        }
        if self.back_ends.is_empty() {
            return Err(Error::Config("at least one back-end is required".into()));
        }
        if self.back_ends.contains(&BackEnd::Mcmc)
            && self
                .conditions
                .iter()
                .any(|c| matches!(c, Condition::FixedTheta | Condition::FixedBeta))
        {
            return Err(Error::Config(
                "the mcmc back-end searches the continuous (theta, beta) space jointly \
                 and cannot pin one coordinate to a hypothesis; drop fixed_theta/fixed_beta \
                 or run them with the discrete back-end only"
                    .into(),
            ));
        }
        if self.conditions.contains(&Condition::FixedBeta) && self.expertise_groups.len() < 2 {
            return Err(Error::Config(
                "fixed_beta draws from the opposite expertise group and needs at least two groups"
                    .into(),
            ));
        }
        let (lo, hi) = self.out_of_set_beta_interval;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(Error::Config(format!(
                "out-of-set temperature interval ({lo}, {hi}) is not a positive interval"
            )));
        }
        if self.hypotheses.k_values.is_empty() || self.hypotheses.k_values.contains(&0) {
            return Err(Error::Config("k values must be positive and non-empty".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Config(format!(
                "discount must lie in (0, 1), got {}",
                self.discount
            )));
        }
        if self.horizon_cap == 0 {
            return Err(Error::Config("horizon cap must be positive".into()));
        }
        self.mcmc.validate()?;
        Ok(())
    }
}

/// Read a config from TOML or JSON, by file extension.
pub fn load_experiment_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let parse_err = |detail: String| Error::Parse {
        path: path.display().to_string(),
        detail,
    };
    let cfg: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?,
        _ => toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// One line of the results CSV. The header is exactly this field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub environment: String,
    pub run: usize,
    pub condition: String,
    pub expertise_group: String,
    pub k: usize,
    pub episodes_seen: usize,
    /// Estimated preference vector, components joined by ';'.
    pub theta_hat: String,
    pub beta_hat: Option<f64>,
    pub expertise_distance: Option<f64>,
    pub preference_similarity: Option<f64>,
    pub policy_regret: Option<f64>,
    /// Inference time for this schedule step (cumulative over a schedule
    /// within one instance and back-end). Excluded from determinism checks.
    pub wall_clock_seconds: f64,
    pub back_end: String,
    /// Empty on success; the failure message otherwise.
    pub error: String,
    // Ground truth and sensitivity factors, for the analysis step.
    pub theta_star: String,
    pub beta_star: Option<f64>,
    pub psi_size: usize,
    pub num_states: usize,
    pub mean_episode_length: Option<f64>,
}

pub fn format_theta(theta: &[f64]) -> String {
    theta.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn parse_theta(text: &str) -> Result<Vec<f64>> {
    text.split(';')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse { path: "theta".into(), detail: e.to_string() })
        })
        .collect()
}

pub fn write_results(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(|e| Error::Parse {
            path: path.as_ref().display().to_string(),
            detail: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Build (or load) the environment roster as (id, model) pairs.
pub fn materialize_environments(cfg: &ExperimentConfig) -> Result<Vec<(String, Model)>> {
    match &cfg.environments {
        EnvironmentsSpec::Count { count } => (0..*count)
            .map(|i| {
                let env = generate_environment(
                    derive_seed(cfg.seed, &[CH_ENV, i as u64]),
                    &GenerationConfig::default(),
                )?;
                let model = Environment::ZoneGrid(env).build_model(cfg.discount)?;
                Ok((format!("env-{i}"), model))
            })
            .collect(),
        EnvironmentsSpec::Files { files } => files
            .iter()
            .map(|f| {
                let id = f
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| f.display().to_string());
                Ok((id, load_environment(f)?.build_model(cfg.discount)?))
            })
            .collect(),
    }
}

/// All temperatures from groups other than `own`: the "opposite group" pool
/// the fixed-expertise condition draws its wrong assumption from.
pub fn opposite_group_betas(groups: &[ExpertiseGroup], own: usize) -> Vec<f64> {
    groups
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != own)
        .flat_map(|(_, g)| g.betas.iter().copied())
        .collect()
}

/// Name of the group whose listed temperature lies closest to `beta`; how
/// continuous out-of-set truths get a group label.
pub fn classify_group(groups: &[ExpertiseGroup], beta: f64) -> String {
    groups
        .iter()
        .flat_map(|g| g.betas.iter().map(move |b| (g.name.clone(), (b - beta).abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(name, _)| name)
        .unwrap_or_default()
}

/// Draw an out-of-set truth: a preference vector from Θ∖Θ_k and a
/// temperature uniform over the configured interval.
pub fn sample_out_of_set_truth(
    grid: &[RewardWeights],
    theta_k: &[RewardWeights],
    interval: (f64, f64),
    rng: &mut impl Rng,
) -> Result<(RewardWeights, f64)> {
    let outside: Vec<&RewardWeights> = grid
        .iter()
        .filter(|g| !theta_k.iter().any(|t| t.as_slice() == g.as_slice()))
        .collect();
    if outside.is_empty() {
        return Err(Error::Domain(
            "the sampled subset covers the whole grid; no out-of-set vector exists".into(),
        ));
    }
    let theta = outside[rng.gen_range(0..outside.len())].clone();
    let beta = rng.gen_range(interval.0..=interval.1);
    Ok((theta, beta))
}

struct InstanceKey {
    env_idx: usize,
    run: usize,
    k_idx: usize,
    group_idx: usize,
}

/// Everything the conditions of one instance share.
struct InstanceTruth {
    theta_star: RewardWeights,
    beta_star: f64,
    demos: EpisodeSet,
}

/// Run the whole grid. Row order is the deterministic nesting environment →
/// run → k → expertise group → condition → back-end → schedule point.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let envs = materialize_environments(cfg)?;
    let grid = Arc::new(theta_grid(
        &cfg.hypotheses.component_values,
        cfg.hypotheses.dim,
        cfg.hypotheses.dedupe,
    )?);

    let mut keys = Vec::new();
    for env_idx in 0..envs.len() {
        for run in 0..cfg.runs {
            for k_idx in 0..cfg.hypotheses.k_values.len() {
                for group_idx in 0..cfg.expertise_groups.len() {
                    keys.push(InstanceKey { env_idx, run, k_idx, group_idx });
                }
            }
        }
    }

    let rows: Vec<Vec<ResultRow>> = keys
        .par_iter()
        .map(|key| run_instance(cfg, &envs[key.env_idx], &grid, key))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn instance_path(key: &InstanceKey) -> [u64; 4] {
    [key.env_idx as u64, key.run as u64, key.k_idx as u64, key.group_idx as u64]
}

fn run_instance(
    cfg: &ExperimentConfig,
    env: &(String, Model),
    grid: &Arc<Vec<RewardWeights>>,
    key: &InstanceKey,
) -> Vec<ResultRow> {
    let (env_id, model) = env;
    let k = cfg.hypotheses.k_values[key.k_idx];
    let group = &cfg.expertise_groups[key.group_idx];
    let p = instance_path(key);
    let blank = |condition: Condition, detail: &str| {
        let mut rows = Vec::new();
        for &backend in &cfg.back_ends {
            for &n in &cfg.schedule {
                rows.push(error_row(
                    env_id, key, condition, group.name.clone(), k, n, backend, detail, model,
                ));
            }
        }
        rows
    };

    // Everything in-set conditions share: the subset, the truth, the demos.
    let shared = (|| -> Result<(Vec<RewardWeights>, InstanceTruth)> {
        let theta_k = sample_thetas(
            grid,
            k,
            derive_seed(cfg.seed, &[CH_HYP, p[0], p[1], p[2], p[3]]),
        )?;
        let mut rng = rng_from(cfg.seed, &[CH_TRUTH, p[0], p[1], p[2], p[3]]);
        let theta_star = theta_k[rng.gen_range(0..theta_k.len())].clone();
        let beta_star = group.betas[rng.gen_range(0..group.betas.len())];
        let demos = simulate_demos(cfg, model, &theta_star, beta_star, CH_DEMOS, &p)?;
        Ok((theta_k, InstanceTruth { theta_star, beta_star, demos }))
    })();
    let (theta_k, in_truth) = match shared {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .conditions
                .iter()
                .flat_map(|&c| blank(c, &msg))
                .collect();
        }
    };

    let mut rows = Vec::new();
    for &condition in &cfg.conditions {
        let prepared = prepare_condition(cfg, model, grid, &theta_k, &in_truth, key, condition);
        match prepared {
            Ok((truth, set, group_label)) => {
                for &backend in &cfg.back_ends {
                    rows.extend(run_backend(
                        cfg, env_id, model, key, condition, backend, &truth, set.clone(),
                        group_label.clone(), k,
                    ));
                }
            }
            Err(e) => rows.extend(blank(condition, &e.to_string())),
        }
    }
    rows
}

fn simulate_demos(
    cfg: &ExperimentConfig,
    model: &Model,
    theta: &RewardWeights,
    beta: f64,
    channel: u64,
    p: &[u64; 4],
) -> Result<EpisodeSet> {
    let sim = SimulatorConfig {
        num_episodes: *cfg.schedule.last().unwrap(),
        horizon_cap: cfg.horizon_cap,
        seed: derive_seed(cfg.seed, &[channel, p[0], p[1], p[2], p[3]]),
    };
    let demos = generate_episode_set_with(
        model.mdp(),
        theta,
        ExpertiseLevel::new(beta)?,
        &sim,
        &cfg.solver,
    )?;
    Ok(demos.episodes)
}

/// Resolve a condition to (truth to score against, inference set, group
/// label). The set is `None` for back-ends that do not use one.
#[allow(clippy::type_complexity)]
fn prepare_condition(
    cfg: &ExperimentConfig,
    model: &Model,
    grid: &Arc<Vec<RewardWeights>>,
    theta_k: &[RewardWeights],
    in_truth: &InstanceTruth,
    key: &InstanceKey,
    condition: Condition,
) -> Result<(Arc<InstanceTruth>, Arc<HypothesisSet>, String)> {
    let p = instance_path(key);
    let group = &cfg.expertise_groups[key.group_idx];
    let betas: Result<Vec<ExpertiseLevel>> = cfg
        .hypotheses
        .betas
        .iter()
        .map(|&b| ExpertiseLevel::new(b))
        .collect();
    let base = HypothesisSet::new(theta_k.to_vec(), betas?)?;

    match condition {
        Condition::FullSet => Ok((
            Arc::new(InstanceTruth {
                theta_star: in_truth.theta_star.clone(),
                beta_star: in_truth.beta_star,
                demos: in_truth.demos.clone(),
            }),
            Arc::new(base),
            group.name.clone(),
        )),
        Condition::FixedTheta => {
            let mut rng =
                rng_from(cfg.seed, &[CH_ASSUMPTION, p[0], p[1], p[2], p[3], condition.index()]);
            let mut pool: Vec<&RewardWeights> = theta_k
                .iter()
                .filter(|t| t.as_slice() != in_truth.theta_star.as_slice())
                .collect();
            if pool.is_empty() {
                // A single-vector subset: fall back to the rest of the grid.
                pool = grid
                    .iter()
                    .filter(|t| t.as_slice() != in_truth.theta_star.as_slice())
                    .collect();
            }
            if pool.is_empty() {
                return Err(Error::Domain(
                    "no wrong preference vector is available to pin".into(),
                ));
            }
            let wrong = pool[rng.gen_range(0..pool.len())].clone();
            Ok((
                Arc::new(InstanceTruth {
                    theta_star: in_truth.theta_star.clone(),
                    beta_star: in_truth.beta_star,
                    demos: in_truth.demos.clone(),
                }),
                Arc::new(base.with_fixed_theta(wrong)),
                group.name.clone(),
            ))
        }
        Condition::FixedBeta => {
            let mut rng =
                rng_from(cfg.seed, &[CH_ASSUMPTION, p[0], p[1], p[2], p[3], condition.index()]);
            let pool = opposite_group_betas(&cfg.expertise_groups, key.group_idx);
            let wrong = pool[rng.gen_range(0..pool.len())];
            Ok((
                Arc::new(InstanceTruth {
                    theta_star: in_truth.theta_star.clone(),
                    beta_star: in_truth.beta_star,
                    demos: in_truth.demos.clone(),
                }),
                Arc::new(base.with_fixed_beta(ExpertiseLevel::new(wrong)?)),
                group.name.clone(),
            ))
        }
        Condition::OutOfSet => {
            let mut rng =
                rng_from(cfg.seed, &[CH_OUT_TRUTH, p[0], p[1], p[2], p[3]]);
            let (theta_star, beta_star) = sample_out_of_set_truth(
                grid,
                theta_k,
                cfg.out_of_set_beta_interval,
                &mut rng,
            )?;
            let demos = simulate_demos(cfg, model, &theta_star, beta_star, CH_OUT_DEMOS, &p)?;
            let label = classify_group(&cfg.expertise_groups, beta_star);
            Ok((
                Arc::new(InstanceTruth { theta_star, beta_star, demos }),
                Arc::new(base),
                label,
            ))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_backend(
    cfg: &ExperimentConfig,
    env_id: &str,
    model: &Model,
    key: &InstanceKey,
    condition: Condition,
    backend: BackEnd,
    truth: &Arc<InstanceTruth>,
    set: Arc<HypothesisSet>,
    group_label: String,
    k: usize,
) -> Vec<ResultRow> {
    let p = instance_path(key);
    let mut rows = Vec::new();
    let mut failure: Option<String> = None;

    let mut belief = match backend {
        BackEnd::Discrete => {
            match init_belief(Arc::clone(model.mdp()), Arc::clone(&set), cfg.solver.clone()) {
                Ok(b) => Some(b),
                Err(e) => {
                    failure = Some(e.to_string());
                    None
                }
            }
        }
        BackEnd::Mcmc => None,
    };

    let mut seen = 0usize;
    for (si, &n) in cfg.schedule.iter().enumerate() {
        if let Some(msg) = &failure {
            rows.push(error_row(
                env_id, key, condition, group_label.clone(), k, n, backend, msg, model,
            ));
            continue;
        }
        let timer = Instant::now();
        let estimate: Result<(RewardWeights, f64)> = match backend {
            BackEnd::Discrete => {
                let chunk =
                    EpisodeSet::new(truth.demos.trajectories[seen..n].to_vec());
                match belief.as_ref().unwrap().update_with_episodes(&chunk) {
                    Ok(next) => {
                        let est = next.point_estimates();
                        belief = Some(next);
                        seen = n;
                        Ok(est)
                    }
                    Err(e) => Err(e),
                }
            }
            BackEnd::Mcmc => {
                let chain_cfg = McmcConfig {
                    seed: derive_seed(
                        cfg.seed,
                        &[CH_MCMC, p[0], p[1], p[2], p[3], condition.index(), si as u64],
                    ),
                    ..cfg.mcmc.clone()
                };
                run_chain(model.mdp(), &truth.demos.prefix(n), &cfg.prior, &chain_cfg, &cfg.solver)
                    .and_then(|chain| chain.point_estimate())
            }
        };
        let secs = timer.elapsed().as_secs_f64();

        match estimate.and_then(|(theta_hat, beta_hat)| {
            score_row(cfg, model, truth, &theta_hat, beta_hat).map(|m| (theta_hat, beta_hat, m))
        }) {
            Ok((theta_hat, beta_hat, (dist, sim, regret))) => rows.push(ResultRow {
                environment: env_id.to_string(),
                run: key.run,
                condition: condition.name().to_string(),
                expertise_group: group_label.clone(),
                k,
                episodes_seen: n,
                theta_hat: format_theta(theta_hat.as_slice()),
                beta_hat: Some(beta_hat),
                expertise_distance: Some(dist),
                preference_similarity: Some(sim),
                policy_regret: Some(regret),
                wall_clock_seconds: secs,
                back_end: backend.name().to_string(),
                error: String::new(),
                theta_star: format_theta(truth.theta_star.as_slice()),
                beta_star: Some(truth.beta_star),
                psi_size: set.len(),
                num_states: model.mdp().num_states(),
                mean_episode_length: Some(truth.demos.prefix(n).mean_length()),
            }),
            Err(e) => {
                let msg = e.to_string();
                rows.push(error_row(
                    env_id, key, condition, group_label.clone(), k, n, backend, &msg, model,
                ));
                failure = Some(format!("skipped after earlier failure: {msg}"));
            }
        }
    }
    rows
}

fn score_row(
    cfg: &ExperimentConfig,
    model: &Model,
    truth: &InstanceTruth,
    theta_hat: &RewardWeights,
    beta_hat: f64,
) -> Result<(f64, f64, f64)> {
    let dist = expertise_distance(truth.beta_star, beta_hat);
    let sim = preference_similarity(truth.theta_star.as_slice(), theta_hat.as_slice())?;
    let regret = policy_regret(
        model.mdp(),
        &truth.theta_star,
        ExpertiseLevel::new(truth.beta_star)?,
        theta_hat,
        &cfg.solver,
    )?;
    Ok((dist, sim, regret))
}

#[allow(clippy::too_many_arguments)]
fn error_row(
    env_id: &str,
    key: &InstanceKey,
    condition: Condition,
    group: String,
    k: usize,
    episodes: usize,
    backend: BackEnd,
    detail: &str,
    model: &Model,
) -> ResultRow {
    ResultRow {
        environment: env_id.to_string(),
        run: key.run,
        condition: condition.name().to_string(),
        expertise_group: group,
        k,
        episodes_seen: episodes,
        theta_hat: String::new(),
        beta_hat: None,
        expertise_distance: None,
        preference_similarity: None,
        policy_regret: None,
        wall_clock_seconds: 0.0,
        back_end: backend.name().to_string(),
        error: detail.to_string(),
        theta_star: String::new(),
        beta_star: None,
        psi_size: 0,
        num_states: model.mdp().num_states(),
        mean_episode_length: None,
    }
}

// ---------------------------------------------------------------------------
// Sensitivity analysis over a results table.

/// Factor columns `analyze_results` understands.
pub const ANALYSIS_FACTORS: &[&str] =
    &["episodes_seen", "psi_size", "num_states", "mean_episode_length", "beta_star"];

pub const ANALYSIS_METRICS: &[&str] =
    &["preference_similarity", "expertise_distance", "policy_regret"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub factor: String,
    pub metric: String,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
    /// Empty, or why the coefficient is undefined.
    pub note: String,
}

fn factor_value(row: &ResultRow, factor: &str) -> Option<f64> {
    match factor {
        "episodes_seen" => Some(row.episodes_seen as f64),
        "psi_size" => Some(row.psi_size as f64),
        "num_states" => Some(row.num_states as f64),
        "mean_episode_length" => row.mean_episode_length,
        "beta_star" => row.beta_star,
        _ => None,
    }
}

fn metric_value(row: &ResultRow, metric: &str) -> Option<f64> {
    match metric {
        "preference_similarity" => row.preference_similarity,
        "expertise_distance" => row.expertise_distance,
        "policy_regret" => row.policy_regret,
        _ => None,
    }
}

/// Pearson ρ with a permutation p-value for every (factor, metric) pair.
/// Rows with an error are skipped; constant columns are flagged rather than
/// failed, since a single-schedule experiment legitimately produces them.
pub fn analyze_results(
    rows: &[ResultRow],
    factors: &[&str],
    permutations: usize,
    seed: u64,
) -> Result<Vec<CorrelationRow>> {
    for f in factors {
        if !ANALYSIS_FACTORS.contains(f) {
            return Err(Error::Config(format!(
                "unknown factor column {f}; known factors: {}",
                ANALYSIS_FACTORS.join(", ")
            )));
        }
    }
    let clean: Vec<&ResultRow> = rows.iter().filter(|r| r.error.is_empty()).collect();
    let mut out = Vec::new();
    for (fi, &factor) in factors.iter().enumerate() {
        for (mi, &metric) in ANALYSIS_METRICS.iter().enumerate() {
            let pairs: Vec<(f64, f64)> = clean
                .iter()
                .filter_map(|r| Some((factor_value(r, factor)?, metric_value(r, metric)?)))
                .collect();
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let mut row = CorrelationRow {
                factor: factor.to_string(),
                metric: metric.to_string(),
                rho: None,
                p_value: None,
                n: pairs.len(),
                note: String::new(),
            };
            if pairs.len() < 3 {
                row.note = "insufficient data".into();
            } else {
                match pearson(&xs, &ys, permutations, derive_seed(seed, &[fi as u64, mi as u64])) {
                    Ok((rho, p)) => {
                        row.rho = Some(rho);
                        row.p_value = Some(p);
                    }
                    Err(e) => row.note = format!("undefined: {e}"),
                }
            }
            out.push(row);
        }
    }
    Ok(out)
}

pub fn write_correlations(path: impl AsRef<Path>, rows: &[CorrelationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            environments: EnvironmentsSpec::Count { count: 1 },
            runs: 1,
            hypotheses: GridSpec {
                component_values: vec![0.0, 0.5, 1.0],
                dim: 5,
                k_values: vec![4],
                betas: vec![0.09, 5.0],
                dedupe: false,
            },
            conditions: Condition::ALL.to_vec(),
            schedule: vec![2, 4],
            horizon_cap: 80,
            seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_validation_catches_bad_inputs() {
        let mut c = tiny_config();
        c.conditions.clear();
        assert!(c.validate().is_err());

        let mut c = tiny_config();
        c.schedule = vec![5, 5];
        assert!(c.validate().is_err());

        let mut c = tiny_config();
        c.schedule = vec![10, 5];
        assert!(c.validate().is_err());

        let mut c = tiny_config();
        c.back_ends = vec![BackEnd::Mcmc];
        assert!(matches!(c.validate(), Err(Error::Config(_))));

        let mut c = tiny_config();
        c.expertise_groups.truncate(1);
        assert!(c.validate().is_err(), "fixed_beta with one group must fail");

        let mut c = tiny_config();
        c.environments = EnvironmentsSpec::Files { files: vec!["/no/such/file.json".into()] };
        assert!(c.validate().is_err());

        tiny_config().validate().unwrap();
    }

    #[test]
    fn config_loads_from_toml_and_json() {
        let dir = tempdir().unwrap();
        let toml_path = dir.path().join("exp.toml");
        std::fs::write(
            &toml_path,
            r#"
runs = 3
conditions = ["full_set", "fixed_beta"]
schedule = [5, 10]
seed = 99

[environments]
count = 2

[hypotheses]
k_values = [10]
"#,
        )
        .unwrap();
        let cfg = load_experiment_config(&toml_path).unwrap();
        assert_eq!(cfg.runs, 3);
        assert_eq!(cfg.conditions, vec![Condition::FullSet, Condition::FixedBeta]);
        assert_eq!(cfg.hypotheses.k_values, vec![10]);
        assert_eq!(cfg.hypotheses.dim, 5, "unset fields keep defaults");
        assert_eq!(cfg.seed, 99);

        let json_path = dir.path().join("exp.json");
        std::fs::write(
            &json_path,
            r#"{"environments": {"count": 1}, "runs": 1, "schedule": [3]}"#,
        )
        .unwrap();
        let cfg = load_experiment_config(&json_path).unwrap();
        assert_eq!(cfg.runs, 1);
        assert_eq!(cfg.schedule, vec![3]);

        std::fs::write(&toml_path, "runs = 0\n").unwrap();
        assert!(load_experiment_config(&toml_path).is_err());
    }

    #[test]
    fn opposite_groups_and_classification() {
        let groups = default_expertise_groups();
        let pool = opposite_group_betas(&groups, 0);
        assert_eq!(pool, vec![0.5, 1.0, 5.0, 10.0]);
        let pool = opposite_group_betas(&groups, 1);
        assert_eq!(pool, vec![0.01, 0.09, 5.0, 10.0]);
        assert_eq!(classify_group(&groups, 0.02), "high");
        assert_eq!(classify_group(&groups, 0.7), "medium");
        assert_eq!(classify_group(&groups, 9.0), "low");
    }

    #[test]
    fn out_of_set_truth_avoids_the_subset() {
        let grid = theta_grid(&[0.0, 0.5, 1.0], 3, true).unwrap();
        let subset = sample_thetas(&grid, 5, 11).unwrap();
        let mut rng = rng_from(13, &[]);
        for _ in 0..50 {
            let (theta, beta) =
                sample_out_of_set_truth(&grid, &subset, (0.01, 5.0), &mut rng).unwrap();
            assert!(!subset.iter().any(|t| t.as_slice() == theta.as_slice()));
            assert!((0.01..=5.0).contains(&beta));
        }
        // Subset = grid leaves nothing outside.
        assert!(sample_out_of_set_truth(&grid, &grid, (0.01, 5.0), &mut rng).is_err());
    }

    #[test]
    fn tiny_experiment_produces_a_full_clean_grid() {
        let cfg = tiny_config();
        let rows = run_experiment(&cfg).unwrap();
        // 1 env × 1 run × 1 k × 3 groups × 4 conditions × 1 back-end × 2 points
        assert_eq!(rows.len(), 3 * 4 * 2);
        for row in &rows {
            assert_eq!(row.error, "", "row failed: {}", row.error);
            assert!(row.beta_hat.unwrap() > 0.0);
            assert!(row.expertise_distance.unwrap().is_finite());
            assert!(row.policy_regret.unwrap() >= 0.0);
            let sim = row.preference_similarity.unwrap();
            assert!((-1.0..=1.0 + 1e-12).contains(&sim));
            assert!(row.episodes_seen == 2 || row.episodes_seen == 4);
            assert_eq!(row.back_end, "discrete");
            assert!(!row.theta_hat.is_empty());
            assert_eq!(parse_theta(&row.theta_hat).unwrap().len(), 5);
        }
        // Conditions appear in the declared order within each group block.
        let conds: Vec<&str> = rows[..8].iter().map(|r| r.condition.as_str()).collect();
        assert_eq!(
            conds,
            vec![
                "full_set", "full_set", "fixed_theta", "fixed_theta", "fixed_beta",
                "fixed_beta", "out_of_set", "out_of_set"
            ]
        );
        // Fixed-theta pins the estimate to one vector across the schedule.
        let fixed: Vec<&ResultRow> =
            rows.iter().filter(|r| r.condition == "fixed_theta").collect();
        for pair in fixed.chunks(2) {
            let a = parse_theta(&pair[0].theta_hat).unwrap();
            let b = parse_theta(&pair[1].theta_hat).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
            assert_eq!(pair[0].psi_size, 2, "one theta times two betas");
        }
        // Fixed-beta rows must use a wrong temperature from another group.
        for row in rows.iter().filter(|r| r.condition == "fixed_beta") {
            assert_ne!(row.beta_hat.unwrap(), row.beta_star.unwrap());
            assert_eq!(row.psi_size, 4, "four thetas times one beta");
        }
        // Out-of-set truths are never members of the sampled subset.
        for row in rows.iter().filter(|r| r.condition == "out_of_set") {
            assert!(row.beta_star.unwrap() >= 0.01);
            assert!(row.beta_star.unwrap() <= 10.0);
        }
    }

    #[test]
    fn reruns_are_identical_modulo_timing() {
        let cfg = ExperimentConfig {
            conditions: vec![Condition::FullSet, Condition::FixedBeta],
            ..tiny_config()
        };
        let strip = |mut rows: Vec<ResultRow>| {
            for r in &mut rows {
                r.wall_clock_seconds = 0.0;
            }
            rows
        };
        let a = strip(run_experiment(&cfg).unwrap());
        let b = strip(run_experiment(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn results_csv_round_trips_with_fixed_header() {
        let cfg = ExperimentConfig {
            conditions: vec![Condition::FullSet],
            schedule: vec![2],
            ..tiny_config()
        };
        let rows = run_experiment(&cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "environment,run,condition,expertise_group,k,episodes_seen,theta_hat,beta_hat,\
             expertise_distance,preference_similarity,policy_regret,wall_clock_seconds,\
             back_end,error,theta_star,beta_star,psi_size,num_states,mean_episode_length"
        );
        let loaded = load_results(&path).unwrap();
        assert_eq!(loaded, rows);
    }

    #[test]
    fn mcmc_back_end_emits_rows_too() {
        let cfg = ExperimentConfig {
            conditions: vec![Condition::FullSet],
            back_ends: vec![BackEnd::Discrete, BackEnd::Mcmc],
            schedule: vec![3],
            expertise_groups: vec![ExpertiseGroup { name: "high".into(), betas: vec![0.09] }],
            mcmc: McmcConfig { max_iterations: 40, ..McmcConfig::default() },
            ..tiny_config()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        let backends: Vec<&str> = rows.iter().map(|r| r.back_end.as_str()).collect();
        assert_eq!(backends, vec!["discrete", "mcmc"]);
        for row in &rows {
            assert_eq!(row.error, "");
            assert!(row.beta_hat.unwrap() > 0.0);
            assert!(row.wall_clock_seconds >= 0.0);
        }
    }

    #[test]
    fn analysis_flags_constants_and_finds_real_correlations() {
        // Synthetic rows: regret falls linearly with episodes; psi_size
        // constant; similarity noisy but positively tied to episodes.
        let mut rows = Vec::new();
        let mut rng = rng_from(5, &[]);
        for i in 0..40 {
            let n = 5 + (i % 4) * 5;
            rows.push(ResultRow {
                environment: "env-0".into(),
                run: i / 4,
                condition: "full_set".into(),
                expertise_group: "high".into(),
                k: 10,
                episodes_seen: n,
                theta_hat: "0.5;0.5".into(),
                beta_hat: Some(0.1),
                expertise_distance: Some(1.0 / n as f64 + rng.gen::<f64>() * 1e-3),
                preference_similarity: Some(n as f64 / 20.0),
                policy_regret: Some(2.0 - 0.05 * n as f64),
                wall_clock_seconds: 0.1,
                back_end: "discrete".into(),
                error: String::new(),
                theta_star: "0.5;0.5".into(),
                beta_star: Some(0.09),
                psi_size: 60,
                num_states: 100,
                mean_episode_length: Some(12.0),
            });
        }
        // One error row that must be ignored.
        rows.push(ResultRow { error: "boom".into(), policy_regret: Some(1e9), ..rows[0].clone() });

        let table =
            analyze_results(&rows, &["episodes_seen", "psi_size"], 500, 3).unwrap();
        assert_eq!(table.len(), 2 * ANALYSIS_METRICS.len());

        let regret = table
            .iter()
            .find(|r| r.factor == "episodes_seen" && r.metric == "policy_regret")
            .unwrap();
        assert!((regret.rho.unwrap() + 1.0).abs() < 1e-9, "exact linear anti-correlation");
        assert!(regret.p_value.unwrap() < 0.05);
        assert_eq!(regret.n, 40, "error rows are excluded");

        let constant = table
            .iter()
            .find(|r| r.factor == "psi_size" && r.metric == "policy_regret")
            .unwrap();
        assert!(constant.rho.is_none());
        assert!(constant.note.contains("undefined"), "{}", constant.note);

        assert!(analyze_results(&rows, &["no_such_factor"], 10, 0).is_err());
    }
}
