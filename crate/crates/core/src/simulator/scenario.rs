//! `scenario_v1` files: TOML with the map inline (`map = """..."""`) or
//! referenced relative to the scenario file (`map_file = "..."`).
//!
//! ```toml
//! format = "scenario_v1"
//! id = "two_corridor"
//! map_file = "../maps/two_corridor.map"
//! start = [1, 3]
//! goal = [13, 3]
//! instruction_text = "drive to the charging dock on the right"
//! sensing_radius = 2
//! seed = 0
//!
//! [[dynamic_obstacles]]
//! cell = [7, 1]
//! appears_at_step = 2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{load_map, serialize_map, GridPose, MapError, OccupancyGrid};

pub const SCENARIO_FORMAT: &str = "scenario_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicObstacle {
    pub cell: GridPose,
    /// Tick at which the obstacle materializes in the world.
    pub appears_at_step: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub map: OccupancyGrid,
    pub start: GridPose,
    pub goal: GridPose,
    pub instruction_text: String,
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    /// Chebyshev sensing radius in cells.
    pub sensing_radius: u32,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario map: {0}")]
    Map(#[from] MapError),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Scenario {
    /// Scenario without dynamic obstacles.
    pub fn fixed(id: impl Into<String>, map: OccupancyGrid, start: GridPose, goal: GridPose) -> Self {
        Scenario {
            id: id.into(),
            map,
            start,
            goal,
            instruction_text: format!("go to the goal cell {goal}"),
            dynamic_obstacles: Vec::new(),
            sensing_radius: 2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.id.trim().is_empty() {
            return invalid("id is empty".into());
        }
        if !self.map.is_free(self.start) {
            return invalid(format!("start {} is not a free cell", self.start));
        }
        if !self.map.is_free(self.goal) {
            return invalid(format!("goal {} is not a free cell", self.goal));
        }
        if self.sensing_radius < 1 {
            return invalid("sensing_radius must be at least 1".into());
        }
        if self.instruction_text.trim().is_empty() {
            return invalid("instruction_text is empty".into());
        }
        for ob in &self.dynamic_obstacles {
            if !self.map.in_bounds(ob.cell) {
                return invalid(format!("dynamic obstacle {} is outside the map", ob.cell));
            }
            if ob.cell == self.start {
                return invalid(format!("dynamic obstacle {} sits on the start cell", ob.cell));
            }
        }
        Ok(())
    }

    /// Parses scenario text; `base_dir` resolves a relative `map_file`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text)?;
        if raw.format != SCENARIO_FORMAT {
            return Err(ScenarioError::Invalid(format!(
                "unsupported format {:?}, expected {SCENARIO_FORMAT:?}",
                raw.format
            )));
        }
        let map = match (raw.map, raw.map_file) {
            (Some(inline), None) => load_map(inline.trim_start_matches('\n'))?,
            (None, Some(file)) => {
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })?;
                load_map(&text)?
            }
            _ => {
                return Err(ScenarioError::Invalid(
                    "exactly one of `map` and `map_file` is required".into(),
                ))
            }
        };
        let scenario = Scenario {
            id: raw.id,
            map,
            start: raw.start.into(),
            goal: raw.goal.into(),
            instruction_text: raw.instruction_text,
            dynamic_obstacles: raw
                .dynamic_obstacles
                .into_iter()
                .map(|d| DynamicObstacle {
                    cell: d.cell.into(),
                    appears_at_step: d.appears_at_step,
                })
                .collect(),
            sensing_radius: raw.sensing_radius,
            seed: raw.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Serializes with the map inline.
    pub fn to_toml(&self) -> String {
        let raw = RawScenario {
            format: SCENARIO_FORMAT.to_string(),
            id: self.id.clone(),
            map: Some(serialize_map(&self.map)),
            map_file: None,
            start: Pair::from(self.start),
            goal: Pair::from(self.goal),
            instruction_text: self.instruction_text.clone(),
            sensing_radius: self.sensing_radius,
            seed: self.seed,
            dynamic_obstacles: self
                .dynamic_obstacles
                .iter()
                .map(|d| RawObstacle {
                    cell: d.cell.into(),
                    appears_at_step: d.appears_at_step,
                })
                .collect(),
        };
        toml::to_string(&raw).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Pair([i32; 2]);

impl From<Pair> for GridPose {
    fn from(Pair([x, y]): Pair) -> Self {
        GridPose::new(x, y)
    }
}

impl From<GridPose> for Pair {
    fn from(p: GridPose) -> Self {
        Pair([p.x, p.y])
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    cell: Pair,
    appears_at_step: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    format: String,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map_file: Option<String>,
    start: Pair,
    goal: Pair,
    instruction_text: String,
    sensing_radius: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    dynamic_obstacles: Vec<RawObstacle>,
}
