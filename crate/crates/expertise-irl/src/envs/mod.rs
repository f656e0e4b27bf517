//! Environment families and their JSON file format.
//!
//! Two families share one on-disk schema discriminated by `"kind"`:
//! zone gridworlds (`zone_grid`) and warehouse maps (`warehouse`). Cells use
//! an origin at the top-left corner with x growing rightward and y growing
//! downward, so `north` means "one cell up the page".

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};

pub mod warehouse;
pub mod zone;

pub use warehouse::{build_warehouse_mdp, OffRoadConvention, WarehouseEnvironment, WarehouseModel};
pub use zone::{
    build_zone_mdp, generate_environment, zone_feature_map, GenerationConfig, ZoneFeatureMap,
    ZoneGridEnvironment, ZoneGridModel,
};

/// The four cardinal movement commands; also the orientation of a road.
/// Action ids are the variant order: 0 north, 1 south, 2 east, 3 west.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    pub fn id(self) -> ActionId {
        match self {
            Direction::North => 0,
            Direction::South => 1,
            Direction::East => 2,
            Direction::West => 3,
        }
    }

    pub fn from_id(id: ActionId) -> Option<Direction> {
        Direction::ALL.get(id).copied()
    }

    /// Cell offset (dx, dy) of one step.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::North => (0, -1),
            Direction::South => (0, 1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }

    pub fn axis(self) -> Heading {
        match self {
            Direction::North | Direction::South => Heading::Vertical,
            Direction::East | Direction::West => Heading::Horizontal,
        }
    }
}

/// Travel axis of a warehouse robot (or of a movement command).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    #[serde(rename = "h")]
    Horizontal,
    #[serde(rename = "v")]
    Vertical,
}

impl Heading {
    pub fn index(self) -> usize {
        match self {
            Heading::Horizontal => 0,
            Heading::Vertical => 1,
        }
    }

    pub fn from_index(i: usize) -> Heading {
        if i == 0 {
            Heading::Horizontal
        } else {
            Heading::Vertical
        }
    }
}

/// Axis-aligned cell rectangle, stored on disk as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, usize, usize)", into = "(usize, usize, usize, usize)")]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, cx: usize, cy: usize) -> bool {
        cx >= self.x && cx < self.x + self.w && cy >= self.y && cy < self.y + self.h
    }
}

impl From<(usize, usize, usize, usize)> for Rect {
    fn from((x, y, w, h): (usize, usize, usize, usize)) -> Self {
        Rect { x, y, w, h }
    }
}

impl From<Rect> for (usize, usize, usize, usize) {
    fn from(r: Rect) -> Self {
        (r.x, r.y, r.w, r.h)
    }
}

/// What a zone rectangle means. Gridworlds use the first five kinds;
/// warehouses use `road` and `restricted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Avoid,
    Road,
    Slow,
    HighTraffic,
    Obstacle,
    Restricted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub kind: ZoneKind,
    pub rect: Rect,
    /// Required for roads, absent everywhere else.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

/// An environment file: one JSON object discriminated by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Environment {
    ZoneGrid(ZoneGridEnvironment),
    Warehouse(WarehouseEnvironment),
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        match self {
            Environment::ZoneGrid(env) => env.validate(),
            Environment::Warehouse(env) => env.validate(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Environment::ZoneGrid(_) => "zone_grid",
            Environment::Warehouse(_) => "warehouse",
        }
    }

    /// Build the tabular model with the default warehouse road convention.
    pub fn build_model(&self, discount: f64) -> Result<Model> {
        self.build_model_with(discount, OffRoadConvention::default())
    }

    pub fn build_model_with(
        &self,
        discount: f64,
        convention: OffRoadConvention,
    ) -> Result<Model> {
        match self {
            Environment::ZoneGrid(env) => Ok(Model::ZoneGrid(build_zone_mdp(env, discount)?)),
            Environment::Warehouse(env) => {
                Ok(Model::Warehouse(build_warehouse_mdp(env, discount, convention)?))
            }
        }
    }
}

/// A built environment: the MDP plus the cell bookkeeping needed to map
/// between observations, states, and zone semantics.
#[derive(Debug, Clone)]
pub enum Model {
    ZoneGrid(ZoneGridModel),
    Warehouse(WarehouseModel),
}

impl Model {
    pub fn mdp(&self) -> &Arc<TabularMdp> {
        match self {
            Model::ZoneGrid(m) => &m.mdp,
            Model::Warehouse(m) => &m.mdp,
        }
    }

    /// State for an observed cell (and heading, where states carry one).
    /// Gridworld states ignore the heading; warehouses default to horizontal
    /// when none is given.
    pub fn state_of(&self, cell: (usize, usize), heading: Option<Heading>) -> Result<StateId> {
        match self {
            Model::ZoneGrid(m) => m.state_of(cell),
            Model::Warehouse(m) => {
                Ok(m.state_of(cell, heading.unwrap_or(Heading::Horizontal))?)
            }
        }
    }

    pub fn cell_of(&self, s: StateId) -> (usize, usize) {
        match self {
            Model::ZoneGrid(m) => m.cell_of(s),
            Model::Warehouse(m) => m.parts_of(s).0,
        }
    }

    /// Direction of the road covering `cell`, if any.
    pub fn road_direction_at(&self, cell: (usize, usize)) -> Option<Direction> {
        match self {
            Model::ZoneGrid(m) => m.road_direction_at(cell),
            Model::Warehouse(m) => m.road_direction_at(cell),
        }
    }

    /// Whether `cell` lies in a keep-out region (avoid zone / restricted area).
    pub fn is_no_entry(&self, cell: (usize, usize)) -> bool {
        match self {
            Model::ZoneGrid(m) => m.is_avoid(cell),
            Model::Warehouse(m) => m.is_restricted(cell),
        }
    }

    pub fn describe_state(&self, s: StateId) -> String {
        match self {
            Model::ZoneGrid(m) => {
                let (x, y) = m.cell_of(s);
                format!("({x}, {y})")
            }
            Model::Warehouse(m) => {
                let ((x, y), h) = m.parts_of(s);
                let h = if h == Heading::Horizontal { "h" } else { "v" };
                format!("({x}, {y}, {h})")
            }
        }
    }
}

/// Per-cell zone membership, painted once from the zone list.
/// When road rectangles overlap, the first-listed zone wins.
#[derive(Debug, Clone)]
pub(crate) struct ZonePaint {
    width: usize,
    pub road: Vec<Option<Direction>>,
    pub avoid: Vec<bool>,
    pub slow: Vec<bool>,
    pub high_traffic: Vec<bool>,
    pub obstacle: Vec<bool>,
    pub restricted: Vec<bool>,
}

impl ZonePaint {
    pub fn new(width: usize, height: usize, zones: &[Zone]) -> ZonePaint {
        let n = width * height;
        let mut paint = ZonePaint {
            width,
            road: vec![None; n],
            avoid: vec![false; n],
            slow: vec![false; n],
            high_traffic: vec![false; n],
            obstacle: vec![false; n],
            restricted: vec![false; n],
        };
        for zone in zones {
            for cy in zone.rect.y..zone.rect.y + zone.rect.h {
                for cx in zone.rect.x..zone.rect.x + zone.rect.w {
                    let i = cy * width + cx;
                    match zone.kind {
                        ZoneKind::Road => {
                            if paint.road[i].is_none() {
                                paint.road[i] = zone.direction;
                            }
                        }
                        ZoneKind::Avoid => paint.avoid[i] = true,
                        ZoneKind::Slow => paint.slow[i] = true,
                        ZoneKind::HighTraffic => paint.high_traffic[i] = true,
                        ZoneKind::Obstacle => paint.obstacle[i] = true,
                        ZoneKind::Restricted => paint.restricted[i] = true,
                    }
                }
            }
        }
        paint
    }

    pub fn idx(&self, cell: (usize, usize)) -> usize {
        cell.1 * self.width + cell.0
    }
}

/// Shared geometry validation: every rectangle must fit inside the grid and
/// carry a direction exactly when it is a road.
pub(crate) fn validate_zone_geometry(
    width: usize,
    height: usize,
    zones: &[Zone],
    allowed: &[ZoneKind],
) -> Result<()> {
    for (i, zone) in zones.iter().enumerate() {
        if !allowed.contains(&zone.kind) {
            return Err(Error::Validation(format!(
                "zones[{i}].kind: {:?} is not allowed in this environment family",
                zone.kind
            )));
        }
        let r = &zone.rect;
        if r.w == 0 || r.h == 0 {
            return Err(Error::Validation(format!(
                "zones[{i}].rect: empty rectangle {:?}",
                (r.x, r.y, r.w, r.h)
            )));
        }
        if r.x + r.w > width || r.y + r.h > height {
            return Err(Error::Validation(format!(
                "zones[{i}].rect: {:?} exceeds the {width}x{height} grid",
                (r.x, r.y, r.w, r.h)
            )));
        }
        match (zone.kind, zone.direction) {
            (ZoneKind::Road, None) => {
                return Err(Error::Validation(format!(
                    "zones[{i}].direction: roads must specify a direction"
                )))
            }
            (k, Some(_)) if k != ZoneKind::Road => {
                return Err(Error::Validation(format!(
                    "zones[{i}].direction: only roads carry a direction, found one on {k:?}"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Write an environment to a JSON file (validating first).
pub fn save_environment(path: impl AsRef<Path>, env: &Environment) -> Result<()> {
    env.validate()?;
    let mut text = serde_json::to_string_pretty(env)
        .map_err(|e| Error::Numeric(format!("environment serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Read and validate an environment JSON file.
pub fn load_environment(path: impl AsRef<Path>) -> Result<Environment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let env: Environment = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    env.validate()?;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_ids_round_trip() {
        for dir in Direction::ALL {
            assert_eq!(Direction::from_id(dir.id()), Some(dir));
            assert_eq!(dir.opposite().opposite(), dir);
        }
        assert_eq!(Direction::from_id(4), None);
    }

    #[test]
    fn rect_serializes_as_array() {
        let r = Rect { x: 1, y: 2, w: 3, h: 4 };
        assert_eq!(serde_json::to_string(&r).unwrap(), "[1,2,3,4]");
        let back: Rect = serde_json::from_str("[1,2,3,4]").unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn zone_paint_first_road_wins() {
        let zones = vec![
            Zone {
                kind: ZoneKind::Road,
                rect: Rect { x: 0, y: 0, w: 2, h: 1 },
                direction: Some(Direction::East),
            },
            Zone {
                kind: ZoneKind::Road,
                rect: Rect { x: 1, y: 0, w: 2, h: 1 },
                direction: Some(Direction::West),
            },
        ];
        let paint = ZonePaint::new(3, 1, &zones);
        assert_eq!(paint.road[0], Some(Direction::East));
        assert_eq!(paint.road[1], Some(Direction::East)); // overlap: first wins
        assert_eq!(paint.road[2], Some(Direction::West));
    }

    #[test]
    fn environment_json_round_trips() {
        let samples = vec![
            Environment::ZoneGrid(ZoneGridEnvironment {
                width: 6,
                height: 5,
                goal: (5, 4),
                zones: vec![Zone {
                    kind: ZoneKind::Road,
                    rect: Rect { x: 0, y: 2, w: 6, h: 1 },
                    direction: Some(Direction::East),
                }],
                seed: 7,
            }),
            Environment::Warehouse(WarehouseEnvironment {
                width: 4,
                height: 4,
                goal: vec![(3, 3)],
                zones: vec![],
                seed: 9,
            }),
        ];
        for env in samples {
            let text = serde_json::to_string(&env).unwrap();
            assert!(text.contains("\"kind\""), "missing discriminator: {text}");
            let back: Environment = serde_json::from_str(&text).unwrap();
            assert_eq!(back, env);
        }
    }

    #[test]
    fn geometry_validation_names_the_field() {
        let zones = vec![Zone {
            kind: ZoneKind::Road,
            rect: Rect { x: 0, y: 0, w: 2, h: 1 },
            direction: None,
        }];
        let err = validate_zone_geometry(5, 5, &zones, &[ZoneKind::Road]).unwrap_err();
        assert!(err.to_string().contains("zones[0].direction"), "{err}");

        let zones = vec![Zone {
            kind: ZoneKind::Slow,
            rect: Rect { x: 4, y: 0, w: 3, h: 1 },
            direction: None,
        }];
        let err = validate_zone_geometry(5, 5, &zones, &[ZoneKind::Slow]).unwrap_err();
        assert!(err.to_string().contains("zones[0].rect"), "{err}");
    }
}
