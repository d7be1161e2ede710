//! `suite_v1` benchmark description (TOML). Relative paths resolve against
//! the suite file's directory.
//!
//! ```toml
//! format = "suite_v1"
//! scenarios = ["scenarios/room_world.toml"]
//! planners = ["astar", "rrt", "grounded:mock"]
//! trials_per_pair = 3
//! parallelism = 4
//! connectivity = 4
//!
//! [scorer]
//! tau = 0.5
//!
//! [grounded]
//! revisit_penalty = 0.5
//!
//! [rrt]
//! step_size = 3.0
//!
//! [remote]
//! model_name = "gpt-3.5-turbo"
//! cassette = "cassettes/room.jsonl"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{BenchError, PlannerSettings, RemoteSettings};
use crate::classical::RrtParams;
use crate::gridmap::Connectivity;
use crate::grounded::PlannerConfig;
use crate::planner::PlannerKind;
use crate::scorer::ChatEndpointConfig;
use crate::simulator::Scenario;

pub const SUITE_FORMAT: &str = "suite_v1";

#[derive(Debug, Clone)]
pub struct Suite {
    pub scenarios: Vec<Scenario>,
    pub planners: Vec<PlannerKind>,
    pub trials_per_pair: usize,
    pub parallelism: usize,
    pub settings: PlannerSettings,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    format: String,
    scenarios: Vec<String>,
    #[serde(default = "default_planners")]
    planners: Vec<String>,
    #[serde(default = "one")]
    trials_per_pair: usize,
    #[serde(default = "one")]
    parallelism: usize,
    #[serde(default = "four")]
    connectivity: u8,
    #[serde(default)]
    scorer: RawScorer,
    #[serde(default)]
    grounded: PlannerConfig,
    #[serde(default)]
    rrt: RrtParams,
    #[serde(default)]
    remote: RawRemote,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScorer {
    tau: f64,
}

impl Default for RawScorer {
    fn default() -> Self {
        RawScorer {
            tau: PlannerSettings::default().tau,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
struct RawRemote {
    #[serde(default)]
    cassette: Option<String>,
    #[serde(flatten)]
    endpoint: ChatEndpointConfig,
}

fn default_planners() -> Vec<String> {
    vec!["astar".into(), "rrt".into(), "grounded:mock".into()]
}

fn one() -> usize {
    1
}

fn four() -> u8 {
    4
}

pub fn parse_connectivity(n: u8) -> Result<Connectivity, BenchError> {
    match n {
        4 => Ok(Connectivity::Four),
        8 => Ok(Connectivity::Eight),
        other => Err(BenchError::Config(format!("connectivity must be 4 or 8, got {other}"))),
    }
}

impl Suite {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, BenchError> {
        let raw: RawSuite = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        if raw.format != SUITE_FORMAT {
            return Err(BenchError::Config(format!(
                "unsupported format {:?}, expected {SUITE_FORMAT:?}",
                raw.format
            )));
        }
        if raw.scenarios.is_empty() {
            return Err(BenchError::Config("suite lists no scenarios".into()));
        }
        let scenarios = raw
            .scenarios
            .iter()
            .map(|s| Scenario::load(&base_dir.join(s)))
            .collect::<Result<Vec<_>, _>>()?;
        let planners = raw
            .planners
            .iter()
            .map(|p| p.parse::<PlannerKind>().map_err(BenchError::UnknownPlanner))
            .collect::<Result<Vec<_>, _>>()?;
        let settings = PlannerSettings {
            tau: raw.scorer.tau,
            grounded: raw.grounded,
            rrt: raw.rrt,
            connectivity: parse_connectivity(raw.connectivity)?,
            remote: RemoteSettings {
                endpoint: raw.remote.endpoint,
                allow_network: false,
                cassette: raw.remote.cassette.map(|c| base_dir.join(c)),
            },
        };
        settings.validate()?;
        let suite = Suite {
            scenarios,
            planners,
            trials_per_pair: raw.trials_per_pair,
            parallelism: raw.parallelism,
            settings,
        };
        suite.check_counts()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn check_counts(&self) -> Result<(), BenchError> {
        if self.planners.is_empty() {
            return Err(BenchError::Config("suite lists no planners".into()));
        }
        if self.trials_per_pair == 0 || self.parallelism == 0 {
            return Err(BenchError::Config(
                "trials_per_pair and parallelism must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Path of the suite bundled with the crate.
pub fn bundled_suite_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join("suite.toml")
}
