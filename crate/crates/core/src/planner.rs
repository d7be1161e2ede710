//! Common interface over every planner family so the simulator and the
//! benchmark harness can drive them interchangeably.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::classical::{astar, rrt, PlannedPath, RrtParams, SearchResult};
use crate::gridmap::{Connectivity, GridPose, OccupancyGrid};
use crate::grounded::{self, FailureKind, Instruction, PlannerConfig, StepRecord};
use crate::scorer::{PathProposer, ScorerError, TaskScorer};
use crate::translator::{self, MalformedReply};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path")]
    NoPath,
    #[error("invalid planning request: {0}")]
    Invalid(String),
    #[error("grounded planner failed: {kind}")]
    Grounded { kind: FailureKind, partial: PlannedPath },
    #[error("scorer failed: {0}")]
    Scorer(ScorerError),
    #[error("model reply rejected: {0}")]
    Malformed(MalformedReply),
}

/// Result of one planner invocation. `scorer_time` is the part of the call
/// spent inside task-scorer backends.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanAttempt {
    pub outcome: Result<PlannedPath, PlanError>,
    pub scorer_time: Duration,
    pub trace: Vec<StepRecord>,
}

impl PlanAttempt {
    fn plain(outcome: Result<PlannedPath, PlanError>) -> Self {
        PlanAttempt {
            outcome,
            scorer_time: Duration::ZERO,
            trace: Vec::new(),
        }
    }
}

pub trait Planner: Send + Sync {
    fn id(&self) -> String;

    fn plan(&self, grid: &OccupancyGrid, start: GridPose, instruction: &Instruction) -> PlanAttempt;

    /// Called by the simulator from the robot's current cell after the
    /// working map changed.
    fn replan(&self, grid: &OccupancyGrid, current: GridPose, instruction: &Instruction) -> PlanAttempt {
        self.plan(grid, current, instruction)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AstarPlanner {
    pub connectivity: Connectivity,
}

impl Planner for AstarPlanner {
    fn id(&self) -> String {
        "astar".into()
    }

    fn plan(&self, grid: &OccupancyGrid, start: GridPose, instruction: &Instruction) -> PlanAttempt {
        PlanAttempt::plain(match astar(grid, start, instruction.goal, self.connectivity) {
            Ok(SearchResult::Found(p)) => Ok(p),
            Ok(SearchResult::NoPath) => Err(PlanError::NoPath),
            Err(e) => Err(PlanError::Invalid(e.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RrtPlanner {
    pub params: RrtParams,
}

impl Planner for RrtPlanner {
    fn id(&self) -> String {
        "rrt".into()
    }

    fn plan(&self, grid: &OccupancyGrid, start: GridPose, instruction: &Instruction) -> PlanAttempt {
        PlanAttempt::plain(match rrt(grid, start, instruction.goal, &self.params) {
            Ok(SearchResult::Found(p)) => Ok(p),
            Ok(SearchResult::NoPath) => Err(PlanError::NoPath),
            Err(e) => Err(PlanError::Invalid(e.to_string())),
        })
    }
}

/// Stepwise planner driven by a task scorer.
pub struct GroundedPlanner<S> {
    pub scorer: S,
    pub config: PlannerConfig,
}

impl<S: TaskScorer + Send + Sync> Planner for GroundedPlanner<S> {
    fn id(&self) -> String {
        format!("grounded:{}", self.scorer.name())
    }

    fn plan(&self, grid: &OccupancyGrid, start: GridPose, instruction: &Instruction) -> PlanAttempt {
        match grounded::plan(&self.scorer, grid, start, instruction, &self.config) {
            Ok(done) => PlanAttempt {
                outcome: Ok(done.path),
                scorer_time: done.scorer_time,
                trace: done.trace,
            },
            Err(f) => PlanAttempt {
                outcome: Err(PlanError::Grounded {
                    kind: f.kind,
                    partial: f.partial,
                }),
                scorer_time: f.scorer_time,
                trace: f.trace,
            },
        }
    }

    fn replan(&self, grid: &OccupancyGrid, current: GridPose, instruction: &Instruction) -> PlanAttempt {
        // identical loop, fresh visit history
        self.plan(grid, current, instruction)
    }
}

/// One-shot planner: asks the backend for a whole coordinate list and
/// returns it unvalidated, so invalid model paths can be measured.
pub struct FullPathPlanner<P> {
    pub proposer: P,
}

impl<P: PathProposer> FullPathPlanner<P> {
    pub fn new(proposer: P) -> Self {
        FullPathPlanner { proposer }
    }
}

impl<P: PathProposer + Send + Sync> Planner for FullPathPlanner<P> {
    fn id(&self) -> String {
        format!("fullpath:{}", self.proposer.name())
    }

    fn plan(&self, grid: &OccupancyGrid, start: GridPose, instruction: &Instruction) -> PlanAttempt {
        if start == instruction.goal {
            return PlanAttempt::plain(Ok(PlannedPath::new(vec![start], grid.resolution())));
        }
        let t0 = std::time::Instant::now();
        let reply = self.proposer.propose_path(grid, start, instruction);
        let scorer_time = t0.elapsed();
        let outcome = match reply {
            Ok(text) => translator::parse_coordinate_list(&text)
                .map(|c| PlannedPath::new(c.waypoints, grid.resolution()))
                .map_err(PlanError::Malformed),
            Err(e) => Err(PlanError::Scorer(e)),
        };
        PlanAttempt {
            outcome,
            scorer_time,
            trace: Vec::new(),
        }
    }
}

/// Planner families addressable by id: `astar`, `rrt`, `grounded:<backend>`,
/// `fullpath:<backend>` with backend one of `mock`, `oracle`, `remote`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlannerKind {
    Astar,
    Rrt,
    Grounded(Backend),
    FullPath(Backend),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Mock,
    Oracle,
    Remote,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Mock => "mock",
            Backend::Oracle => "oracle",
            Backend::Remote => "remote",
        }
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Backend::Mock),
            "oracle" => Ok(Backend::Oracle),
            "remote" => Ok(Backend::Remote),
            other => Err(format!("unknown scorer backend {other:?}")),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerKind::Astar => f.write_str("astar"),
            PlannerKind::Rrt => f.write_str("rrt"),
            PlannerKind::Grounded(b) => write!(f, "grounded:{}", b.as_str()),
            PlannerKind::FullPath(b) => write!(f, "fullpath:{}", b.as_str()),
        }
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "astar" => Ok(PlannerKind::Astar),
            None if s == "rrt" => Ok(PlannerKind::Rrt),
            Some(("grounded", b)) => Ok(PlannerKind::Grounded(b.parse()?)),
            Some(("fullpath", b)) => Ok(PlannerKind::FullPath(b.parse()?)),
            _ => Err(format!("unknown planner {s:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{load_map, CellState};
    use crate::scorer::{MockScorer, OracleScorer};

    fn p(x: i32, y: i32) -> GridPose {
        GridPose::new(x, y)
    }

    #[test]
    fn planner_ids_round_trip() {
        for id in [
            "astar",
            "rrt",
            "grounded:mock",
            "grounded:oracle",
            "grounded:remote",
            "fullpath:mock",
            "fullpath:oracle",
            "fullpath:remote",
        ] {
            assert_eq!(id.parse::<PlannerKind>().unwrap().to_string(), id);
        }
        for bad in ["", "a*", "grounded", "grounded:gpt", "fullpath:", "rrt:mock"] {
            assert!(bad.parse::<PlannerKind>().is_err(), "{bad}");
        }
    }

    #[test]
    fn all_families_on_a_corridor() {
        let g = load_map("6 3 1.0\n......\n.####.\n......\n").unwrap();
        let i = Instruction::new("go to the far end", p(5, 0));
        let planners: Vec<Box<dyn Planner>> = vec![
            Box::new(AstarPlanner::default()),
            Box::new(RrtPlanner {
                params: RrtParams::with_seed(1),
            }),
            Box::new(GroundedPlanner {
                scorer: MockScorer::new(0.5).unwrap(),
                config: PlannerConfig::default(),
            }),
            Box::new(GroundedPlanner {
                scorer: OracleScorer,
                config: PlannerConfig::default(),
            }),
            Box::new(FullPathPlanner::new(OracleScorer)),
            Box::new(FullPathPlanner::new(MockScorer::new(0.5).unwrap())),
        ];
        for planner in &planners {
            let attempt = planner.plan(&g, p(0, 0), &i);
            let path = attempt.outcome.unwrap_or_else(|e| panic!("{}: {e}", planner.id()));
            assert_eq!(path.start(), Some(p(0, 0)), "{}", planner.id());
            assert_eq!(path.end(), Some(p(5, 0)), "{}", planner.id());
            assert!(path.is_valid(&g, Connectivity::Four), "{}", planner.id());
        }
    }

    #[test]
    fn failures_are_reported() {
        let mut g = OccupancyGrid::filled(3, 3, 1.0, CellState::Free).unwrap();
        for y in 0..3 {
            g.set(p(1, y), CellState::Occupied).unwrap();
        }
        let i = Instruction::new("cross", p(2, 0));
        assert_eq!(
            AstarPlanner::default().plan(&g, p(0, 0), &i).outcome,
            Err(PlanError::NoPath)
        );
        let out = FullPathPlanner::new(OracleScorer).plan(&g, p(0, 0), &i).outcome;
        assert_eq!(out, Err(PlanError::Malformed(MalformedReply::EmptyPath)));
        let grounded = GroundedPlanner {
            scorer: OracleScorer,
            config: PlannerConfig::default(),
        };
        assert!(matches!(
            grounded.plan(&g, p(0, 0), &i).outcome,
            Err(PlanError::Grounded { .. })
        ));
        assert!(matches!(
            AstarPlanner::default().plan(&g, p(1, 1), &i).outcome,
            Err(PlanError::Invalid(_))
        ));
    }
}
