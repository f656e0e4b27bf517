//! Near-deterministic rollouts of an inferred preference vector, with a
//! per-path behavior summary (road usage, wrong-way driving, keep-out
//! entries) for eyeballing what the estimate actually does.

use serde::{Deserialize, Serialize};

use crate::envs::{Direction, Model};
use crate::error::Result;
use crate::mdp::{ExpertiseLevel, RewardWeights, StateId, Trajectory};
use crate::seeds::rng_from;
use crate::simulate::sample_episode;
use crate::solver::{soft_value_iteration, SolverConfig};

/// Temperature used to execute an estimate: low enough that the policy is
/// effectively greedy, high enough to stay in the smooth regime (exact ties
/// are still broken stochastically rather than by index order).
pub const ROLLOUT_BETA: f64 = 0.001;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub beta: f64,
    pub horizon_cap: usize,
    pub seed: u64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig { beta: ROLLOUT_BETA, horizon_cap: 500, seed: 0 }
    }
}

/// Path statistics in the style of a driving report card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    /// Steps taken before reaching a terminal state or the horizon cap.
    pub path_length: usize,
    pub goal_reached: bool,
    /// Moves onto a road cell against its orientation.
    pub wrong_direction_count: usize,
    /// Crossings from free space into a keep-out region.
    pub restricted_entries: usize,
    /// Fraction of steps that land on a road cell.
    pub road_usage_fraction: f64,
    /// Steps whose movement command differs from the previous one.
    pub direction_changes: usize,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub final_state: StateId,
    pub summary: RolloutSummary,
}

/// Execute `theta_hat` near-greedily from `start`.
pub fn optimal_rollout(
    model: &Model,
    theta_hat: &RewardWeights,
    start: StateId,
    cfg: &RolloutConfig,
    solver: &SolverConfig,
) -> Result<Rollout> {
    let beta = ExpertiseLevel::new(cfg.beta)?;
    let sol = soft_value_iteration(model.mdp(), theta_hat, beta, solver)?;
    let mut rng = rng_from(cfg.seed, &[]);
    let trajectory = sample_episode(&sol, start, cfg.horizon_cap, &mut rng);
    let final_state = match trajectory.steps.last() {
        Some(&(s, a)) => model.mdp().successor(s, a)?,
        None => start,
    };
    let summary = summarize(model, &trajectory, final_state);
    Ok(Rollout { trajectory, final_state, summary })
}

/// Recompute the report card for any trajectory. Kept separate from the
/// rollout so saved trajectories can be summarized too.
pub fn summarize(model: &Model, trajectory: &Trajectory, final_state: StateId) -> RolloutSummary {
    let mdp = model.mdp();
    let mut wrong_direction = 0;
    let mut restricted = 0;
    let mut on_road = 0;
    let mut changes = 0;
    let mut prev_action: Option<usize> = None;
    for &(s, a) in &trajectory.steps {
        let from = model.cell_of(s);
        let to = model.cell_of(mdp.successor(s, a).expect("trajectory was validated"));
        let moved = from != to;
        let dir = Direction::from_id(a).expect("grid actions are directions");
        if let Some(road) = model.road_direction_at(to) {
            on_road += 1;
            if moved && dir == road.opposite() {
                wrong_direction += 1;
            }
        }
        if moved && model.is_no_entry(to) && !model.is_no_entry(from) {
            restricted += 1;
        }
        if prev_action.is_some_and(|p| p != a) {
            changes += 1;
        }
        prev_action = Some(a);
    }
    let path_length = trajectory.len();
    RolloutSummary {
        path_length,
        goal_reached: mdp.is_terminal(final_state),
        wrong_direction_count: wrong_direction,
        restricted_entries: restricted,
        road_usage_fraction: if path_length == 0 {
            0.0
        } else {
            on_road as f64 / path_length as f64
        },
        direction_changes: changes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{
        generate_environment, Environment, GenerationConfig, Rect, Zone, ZoneGridEnvironment,
        ZoneKind,
    };
    use crate::metrics::policy_regret;

    fn road_and_avoid_grid() -> Model {
        // 7x7: an eastbound road across row 3, a keep-out block at (2..4, 1).
        let env = ZoneGridEnvironment {
            width: 7,
            height: 7,
            goal: (6, 3),
            zones: vec![
                Zone {
                    kind: ZoneKind::Road,
                    rect: Rect { x: 0, y: 3, w: 7, h: 1 },
                    direction: Some(Direction::East),
                },
                Zone {
                    kind: ZoneKind::Avoid,
                    rect: Rect { x: 2, y: 1, w: 2, h: 1 },
                    direction: None,
                },
            ],
            seed: 0,
        };
        Environment::ZoneGrid(env).build_model(0.95).unwrap()
    }

    #[test]
    fn road_preferring_estimate_drives_the_road_to_the_goal() {
        let model = road_and_avoid_grid();
        let theta = RewardWeights::new(vec![0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        let start = model.state_of((0, 3), None).unwrap();
        let roll =
            optimal_rollout(&model, &theta, start, &RolloutConfig::default(), &SolverConfig::default())
                .unwrap();
        assert!(roll.summary.goal_reached);
        assert_eq!(roll.summary.path_length, 6); // straight east down the road
        assert_eq!(roll.summary.wrong_direction_count, 0);
        assert_eq!(roll.summary.restricted_entries, 0);
        assert!((roll.summary.road_usage_fraction - 1.0).abs() < 1e-12);
        assert_eq!(roll.summary.direction_changes, 0);
    }

    #[test]
    fn summary_matches_an_independent_per_step_recount() {
        // Hand-authored wander: enter the keep-out block, leave it, ride the
        // road the wrong way once, then correctly.
        let model = road_and_avoid_grid();
        let cells = [
            (1, 1),
            (2, 1), // into keep-out (entry 1)
            (2, 2), // out again
            (2, 3), // onto the road, moving south (perpendicular, on road)
            (1, 3), // west against the eastbound road (wrong direction, on road)
            (2, 3), // east with it (on road)
            (2, 2), // off the road
        ];
        let mut steps = Vec::new();
        for pair in cells.windows(2) {
            let s = model.state_of(pair[0], None).unwrap();
            let dir = Direction::ALL
                .into_iter()
                .find(|d| {
                    let (dx, dy) = d.delta();
                    (pair[0].0 as i64 + dx, pair[0].1 as i64 + dy)
                        == (pair[1].0 as i64, pair[1].1 as i64)
                })
                .unwrap();
            steps.push((s, dir.id()));
        }
        let traj = Trajectory::new(steps);
        let final_state = model.state_of(cells[cells.len() - 1], None).unwrap();
        let got = summarize(&model, &traj, final_state);

        // Independent recount straight off the environment description:
        // zone membership comes from the env's rectangles, not the model.
        let on_road = |c: (usize, usize)| c.1 == 3; // road rect row
        let keep_out = |c: (usize, usize)| c.1 == 1 && (2..4).contains(&c.0);
        let mut wrong = 0;
        let mut entries = 0;
        let mut road_steps = 0;
        for pair in cells.windows(2) {
            if on_road(pair[1]) {
                road_steps += 1;
                if pair[1].0 + 1 == pair[0].0 {
                    wrong += 1; // westward move onto the eastbound road
                }
            }
            if keep_out(pair[1]) && !keep_out(pair[0]) {
                entries += 1;
            }
        }
        assert_eq!(got.path_length, 6);
        assert_eq!(got.wrong_direction_count, wrong);
        assert_eq!(got.wrong_direction_count, 1);
        assert_eq!(got.restricted_entries, entries);
        assert_eq!(got.restricted_entries, 1);
        assert!((got.road_usage_fraction - road_steps as f64 / 6.0).abs() < 1e-12);
        assert_eq!(got.direction_changes, 4); // S S S W E N
        assert!(!got.goal_reached);
    }

    #[test]
    fn capped_rollout_is_flagged_not_erroring() {
        let model = road_and_avoid_grid();
        let theta = RewardWeights::new(vec![0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        let start = model.state_of((0, 0), None).unwrap();
        let cfg = RolloutConfig { horizon_cap: 2, ..RolloutConfig::default() };
        let roll = optimal_rollout(&model, &theta, start, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(roll.summary.path_length, 2);
        assert!(!roll.summary.goal_reached);
    }

    #[test]
    fn indifferent_estimate_still_rolls_out() {
        // Zero road preference on a generated map: nothing to assert about
        // road usage, only that execution is well-behaved.
        let env = generate_environment(23, &GenerationConfig::default()).unwrap();
        let model = Environment::ZoneGrid(env).build_model(0.95).unwrap();
        let theta = RewardWeights::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let start = model.mdp().non_terminal_states()[0];
        let roll =
            optimal_rollout(&model, &theta, start, &RolloutConfig::default(), &SolverConfig::default())
                .unwrap();
        assert!(roll.summary.path_length > 0);
        assert!(roll.summary.road_usage_fraction >= 0.0);
        assert!(roll.summary.road_usage_fraction <= 1.0);
    }

    #[test]
    fn an_estimate_has_zero_regret_against_itself() {
        let model = road_and_avoid_grid();
        let theta = RewardWeights::new(vec![0.4, 0.3, 0.3, 0.0, 0.0]).unwrap();
        let beta = ExpertiseLevel::new(ROLLOUT_BETA).unwrap();
        let regret =
            policy_regret(model.mdp(), &theta, beta, &theta, &SolverConfig::default()).unwrap();
        assert_eq!(regret, 0.0);
    }
}
