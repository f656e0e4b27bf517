//! Warehouse maps: every cell is traversable, but the robot has momentum.
//!
//! A state is a cell plus the robot's travel axis (horizontal/vertical), so
//! a `width x height` map has exactly `width * height * 2` states. Moving
//! along the current axis costs 1; a command on the other axis swings the
//! chassis around and costs 2. Preferred travel lanes ("roads") carry a
//! direction, and some cells are restricted.
//!
//! Features per transition: `[move cost, restricted entry/transit, road use]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{validate_zone_geometry, Direction, Heading, Zone, ZoneKind, ZonePaint};
use crate::error::{Error, Result};
use crate::mdp::{FeatureVector, StateId, TabularMdp};

pub const WAREHOUSE_FEATURE_DIM: usize = 3;

const WAREHOUSE_KINDS: [ZoneKind; 2] = [ZoneKind::Road, ZoneKind::Restricted];

/// How the road feature treats steps that are not road-aligned travel.
///
/// `Penalized` (the default) charges -1 for any step that is not a move
/// along a road's direction — off-road travel included. `Neutral` only
/// charges road cells used against their direction and leaves off-road
/// steps at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffRoadConvention {
    #[default]
    Penalized,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarehouseEnvironment {
    pub width: usize,
    pub height: usize,
    /// Terminal cells (any heading), a list of `[x, y]` on disk.
    pub goal: Vec<(usize, usize)>,
    pub zones: Vec<Zone>,
    pub seed: u64,
}

impl WarehouseEnvironment {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!(
                "width/height: grid must be non-empty, got {}x{}",
                self.width, self.height
            )));
        }
        validate_zone_geometry(self.width, self.height, &self.zones, &WAREHOUSE_KINDS)?;
        if self.goal.is_empty() {
            return Err(Error::Validation(
                "goal: a warehouse needs at least one goal cell".into(),
            ));
        }
        for (i, &(x, y)) in self.goal.iter().enumerate() {
            if x >= self.width || y >= self.height {
                return Err(Error::Validation(format!(
                    "goal[{i}]: ({x}, {y}) lies outside the {}x{} grid",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

/// A warehouse compiled to a tabular MDP.
#[derive(Debug, Clone)]
pub struct WarehouseModel {
    pub env: WarehouseEnvironment,
    pub mdp: Arc<TabularMdp>,
    pub convention: OffRoadConvention,
    paint: ZonePaint,
    goal_mask: Vec<bool>,
}

impl WarehouseModel {
    /// State id of `cell` with the given travel axis.
    pub fn state_of(&self, cell: (usize, usize), heading: Heading) -> Result<StateId> {
        let (x, y) = cell;
        if x >= self.env.width || y >= self.env.height {
            return Err(Error::Validation(format!(
                "cell ({x}, {y}) lies outside the {}x{} grid",
                self.env.width, self.env.height
            )));
        }
        Ok((y * self.env.width + x) * 2 + heading.index())
    }

    /// Cell and heading of a state id.
    pub fn parts_of(&self, s: StateId) -> ((usize, usize), Heading) {
        let heading = Heading::from_index(s % 2);
        let cell_idx = s / 2;
        ((cell_idx % self.env.width, cell_idx / self.env.width), heading)
    }

    pub fn road_direction_at(&self, cell: (usize, usize)) -> Option<Direction> {
        self.paint.road[self.paint.idx(cell)]
    }

    pub fn is_restricted(&self, cell: (usize, usize)) -> bool {
        self.paint.restricted[self.paint.idx(cell)]
    }

    pub fn is_goal_cell(&self, cell: (usize, usize)) -> bool {
        self.goal_mask[self.paint.idx(cell)]
    }
}

/// Compile a warehouse into its deterministic tabular MDP.
///
/// The heading of the successor state always equals the axis of the command,
/// even when the move itself is blocked by the wall: the chassis turns in
/// place. Goal cells are absorbing under both headings.
pub fn build_warehouse_mdp(
    env: &WarehouseEnvironment,
    discount: f64,
    convention: OffRoadConvention,
) -> Result<WarehouseModel> {
    env.validate()?;
    let paint = ZonePaint::new(env.width, env.height, &env.zones);
    let mut goal_mask = vec![false; env.width * env.height];
    for &(x, y) in &env.goal {
        goal_mask[y * env.width + x] = true;
    }

    let n = env.width * env.height * 2;
    let mut actions = Vec::with_capacity(n);
    let mut successors = Vec::with_capacity(n);
    let mut feats = Vec::with_capacity(n);
    let mut terminal = Vec::with_capacity(n);

    for s in 0..n {
        let heading = Heading::from_index(s % 2);
        let cell_idx = s / 2;
        let (x, y) = (cell_idx % env.width, cell_idx / env.width);
        let is_goal = goal_mask[cell_idx];

        let mut row_succ = Vec::with_capacity(4);
        let mut row_feat = Vec::with_capacity(4);
        for dir in Direction::ALL {
            if is_goal {
                row_succ.push(s);
                row_feat.push(FeatureVector::zeros(WAREHOUSE_FEATURE_DIM));
                continue;
            }
            let (dx, dy) = dir.delta();
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            let (tx, ty) = if nx < 0 || ny < 0 || nx >= env.width as i64 || ny >= env.height as i64
            {
                (x, y) // blocked: the chassis still turns onto the command axis
            } else {
                (nx as usize, ny as usize)
            };
            let next = (ty * env.width + tx) * 2 + dir.axis().index();
            row_succ.push(next);

            let moved = (tx, ty) != (x, y);
            let move_cost = if dir.axis() == heading { -1.0 } else { -2.0 };
            let restricted = if paint.restricted[ty * env.width + tx] {
                -1.0
            } else {
                0.0
            };
            let on_road = paint.road[ty * env.width + tx];
            let aligned = moved && on_road == Some(dir);
            let road = if aligned {
                1.0
            } else {
                match convention {
                    OffRoadConvention::Penalized => -1.0,
                    // Neutral: only charge road cells used out of direction.
                    OffRoadConvention::Neutral => {
                        if on_road.is_some() {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            };
            row_feat.push(FeatureVector(vec![move_cost, restricted, road]));
        }
        actions.push(Direction::ALL.iter().map(|d| d.id()).collect());
        successors.push(row_succ);
        feats.push(row_feat);
        terminal.push(is_goal);
    }

    let mdp = Arc::new(TabularMdp::new(actions, successors, feats, terminal, discount)?);
    Ok(WarehouseModel {
        env: env.clone(),
        mdp,
        convention,
        paint,
        goal_mask,
    })
}
