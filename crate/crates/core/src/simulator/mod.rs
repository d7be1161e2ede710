//! Tick-based grid-world executor with scheduled dynamic obstacles.
//!
//! Tick 0: obstacles with `appears_at_step == 0` materialize, the robot
//! senses and the planner is called. Every later tick `t`:
//!
//! 1. obstacles with `appears_at_step <= t` materialize in the world;
//! 2. the robot moves to the next waypoint (collision if that cell is now
//!    occupied in the world);
//! 3. obstacles within Chebyshev `sensing_radius` are copied into the
//!    robot's working map;
//! 4. if a newly sensed obstacle lies on the remaining path, the planner is
//!    asked to replan from the current cell.
//!
//! An obstacle that appears on the very next cell in the tick the robot
//! enters it is therefore never sensed in time.

mod scenario;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use scenario::{DynamicObstacle, Scenario, ScenarioError, SCENARIO_FORMAT};

use crate::classical::PlannedPath;
use crate::gridmap::{CellState, GridPose, OccupancyGrid};
use crate::grounded::Instruction;
use crate::planner::{PlanAttempt, PlanError, Planner};

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    /// Cells occupied by the robot, starting with the start cell. Includes
    /// the cell of a collision.
    pub visited: Vec<GridPose>,
    pub collided: bool,
    pub reached_goal: bool,
    pub replan_count: u32,
    pub steps_taken: u32,
    /// Wall time inside planner calls, scorer time included.
    pub planning_time: Duration,
    pub scorer_time: Duration,
    /// Why execution stopped short, when it did without colliding.
    pub failure: Option<String>,
    /// Robot's map at the end: base map plus every sensed obstacle.
    pub working_map: OccupancyGrid,
    pub planned_paths: Vec<PlannedPath>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    InvalidScenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRule {
    Empty,
    StartAnchor,
    Adjacency,
    Freeness,
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: PathRule,
    pub index: usize,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rule = match self.rule {
            PathRule::Empty => "empty",
            PathRule::StartAnchor => "start",
            PathRule::Adjacency => "adjacency",
            PathRule::Freeness => "freeness",
            PathRule::Goal => "goal",
        };
        write!(f, "{rule} violated at waypoint {}", self.index)
    }
}

/// Structural check of an externally produced path against the scenario's
/// base map: anchored at the start, 4-connected steps, Free cells, and
/// ending on the goal.
pub fn validate_external_path(scenario: &Scenario, waypoints: &[GridPose]) -> Result<(), Violation> {
    validate_on_map(&scenario.map, scenario.start, scenario.goal, waypoints)
}

pub fn validate_on_map(
    map: &OccupancyGrid,
    start: GridPose,
    goal: GridPose,
    waypoints: &[GridPose],
) -> Result<(), Violation> {
    let Some(&first) = waypoints.first() else {
        return Err(Violation {
            rule: PathRule::Empty,
            index: 0,
        });
    };
    if first != start {
        return Err(Violation {
            rule: PathRule::StartAnchor,
            index: 0,
        });
    }
    for (i, &w) in waypoints.iter().enumerate() {
        if i > 0 && waypoints[i - 1].manhattan(w) != 1 {
            return Err(Violation {
                rule: PathRule::Adjacency,
                index: i,
            });
        }
        if !map.is_free(w) {
            return Err(Violation {
                rule: PathRule::Freeness,
                index: i,
            });
        }
    }
    if waypoints.last() != Some(&goal) {
        return Err(Violation {
            rule: PathRule::Goal,
            index: waypoints.len() - 1,
        });
    }
    Ok(())
}

struct Run<'a> {
    scenario: &'a Scenario,
    planner: &'a dyn Planner,
    instruction: Instruction,
    world: OccupancyGrid,
    working: OccupancyGrid,
    materialized: BTreeSet<usize>,
    record_planning: Duration,
    record_scorer: Duration,
    planned_paths: Vec<PlannedPath>,
}

impl Run<'_> {
    fn materialize(&mut self, tick: u32) {
        for (i, ob) in self.scenario.dynamic_obstacles.iter().enumerate() {
            if ob.appears_at_step <= tick && self.materialized.insert(i) {
                // in bounds, checked by Scenario::validate
                let _ = self.world.set(ob.cell, CellState::Occupied);
            }
        }
    }

    /// Copies materialized obstacles near `at` into the working map and
    /// returns the ones that were not known before.
    fn sense(&mut self, at: GridPose) -> Vec<GridPose> {
        let mut fresh = Vec::new();
        for &i in &self.materialized {
            let cell = self.scenario.dynamic_obstacles[i].cell;
            if cell.chebyshev(at) <= self.scenario.sensing_radius && self.working.get(cell) != Some(CellState::Occupied)
            {
                let _ = self.working.set(cell, CellState::Occupied);
                fresh.push(cell);
            }
        }
        fresh
    }

    fn call(&mut self, from: GridPose, first: bool) -> PlanAttempt {
        let t0 = Instant::now();
        let attempt = if first {
            self.planner.plan(&self.working, from, &self.instruction)
        } else {
            self.planner.replan(&self.working, from, &self.instruction)
        };
        self.record_planning += t0.elapsed();
        self.record_scorer += attempt.scorer_time;
        if let Ok(path) = &attempt.outcome {
            self.planned_paths.push(path.clone());
        }
        attempt
    }
}

fn remaining_after(path: PlannedPath, from: GridPose) -> Result<Vec<GridPose>, String> {
    match path.waypoints.first() {
        Some(&first) if first == from => Ok(path.waypoints[1..].to_vec()),
        Some(&first) => Err(format!("planned path starts at {first}, robot is at {from}")),
        None => Err("planner returned an empty path".into()),
    }
}

fn describe(err: &PlanError) -> String {
    format!("planning failed: {err}")
}

/// Runs the planner on the scenario, stepping one waypoint per tick. The
/// global budget is `10 * (width + height)` moves.
pub fn execute(scenario: &Scenario, planner: &dyn Planner) -> Result<ExecutionRecord, SimError> {
    scenario.validate()?;
    let mut run = Run {
        scenario,
        planner,
        instruction: Instruction::new(scenario.instruction_text.clone(), scenario.goal),
        world: scenario.map.clone(),
        working: scenario.map.clone(),
        materialized: BTreeSet::new(),
        record_planning: Duration::ZERO,
        record_scorer: Duration::ZERO,
        planned_paths: Vec::new(),
    };
    let budget = 10 * (scenario.map.width() + scenario.map.height());
    let mut pos = scenario.start;
    let mut visited = vec![pos];
    let mut collided = false;
    let mut replan_count = 0u32;
    let mut steps_taken = 0u32;
    let mut failure: Option<String> = None;

    run.materialize(0);
    run.sense(pos);
    let mut remaining: Vec<GridPose> = Vec::new();
    if pos != scenario.goal {
        match run.call(pos, true).outcome {
            Ok(path) => match remaining_after(path, pos) {
                Ok(r) => remaining = r,
                Err(e) => failure = Some(e),
            },
            Err(e) => failure = Some(describe(&e)),
        }
    }

    let mut tick = 0u32;
    while failure.is_none() && pos != scenario.goal {
        if steps_taken as usize >= budget {
            failure = Some(format!("step budget of {budget} exhausted"));
            break;
        }
        if remaining.is_empty() {
            failure = Some(format!("path ended at {pos} before the goal"));
            break;
        }
        let next = remaining.remove(0);
        if next.chebyshev(pos) != 1 {
            failure = Some(format!("waypoint {next} is not adjacent to {pos}"));
            break;
        }
        tick += 1;
        run.materialize(tick);
        pos = next;
        steps_taken += 1;
        visited.push(pos);
        if !run.world.is_free(pos) {
            collided = true;
            break;
        }
        let fresh = run.sense(pos);
        if pos != scenario.goal && fresh.iter().any(|c| remaining.contains(c)) {
            replan_count += 1;
            match run.call(pos, false).outcome {
                Ok(path) => match remaining_after(path, pos) {
                    Ok(r) => remaining = r,
                    Err(e) => failure = Some(e),
                },
                Err(e) => failure = Some(describe(&e)),
            }
        }
    }

    Ok(ExecutionRecord {
        reached_goal: !collided && pos == scenario.goal,
        visited,
        collided,
        replan_count,
        steps_taken,
        planning_time: run.record_planning,
        scorer_time: run.record_scorer,
        failure,
        working_map: run.working,
        planned_paths: run.planned_paths,
    })
}

/// World map as it stands at `tick`: base map plus every obstacle that has
/// materialized by then.
pub fn world_at(scenario: &Scenario, tick: u32) -> OccupancyGrid {
    let mut world = scenario.map.clone();
    for ob in scenario.dynamic_obstacles.iter().filter(|o| o.appears_at_step <= tick) {
        let _ = world.set(ob.cell, CellState::Occupied);
    }
    world
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::RrtParams;
    use crate::gridmap::load_map;
    use crate::grounded::PlannerConfig;
    use crate::planner::{AstarPlanner, GroundedPlanner, RrtPlanner};
    use crate::scorer::{MockScorer, OracleScorer};

    fn p(x: i32, y: i32) -> GridPose {
        GridPose::new(x, y)
    }

    /// Two horizontal corridors joined at both ends.
    fn two_corridors() -> OccupancyGrid {
        load_map(
            "9 5 1.0\n\
             #########\n\
             .........\n\
             .#######.\n\
             .........\n\
             #########\n",
        )
        .unwrap()
    }

    fn corridor_scenario(obstacles: Vec<DynamicObstacle>, radius: u32) -> Scenario {
        Scenario {
            dynamic_obstacles: obstacles,
            sensing_radius: radius,
            ..Scenario::fixed("two", two_corridors(), p(0, 1), p(8, 1))
        }
    }

    #[test]
    fn static_astar_reaches_goal() {
        let s = corridor_scenario(vec![], 2);
        let rec = execute(&s, &AstarPlanner::default()).unwrap();
        assert!(rec.reached_goal);
        assert!(!rec.collided);
        assert_eq!(rec.replan_count, 0);
        assert_eq!(rec.steps_taken, 8);
        assert_eq!(rec.visited.first(), Some(&p(0, 1)));
        assert_eq!(validate_external_path(&s, &rec.visited), Ok(()));
    }

    #[test]
    fn sensed_obstacle_triggers_replan() {
        // Hand trace, radius 2: the top-corridor path is (0,1)..(8,1).
        // tick 2 the robot enters (2,1); the obstacle at (4,1) appeared at
        // tick 2 and is 2 cells away, so it is sensed and lies ahead. The
        // replanned route backs out through (0,1)-(0,3) to the bottom row.
        let s = corridor_scenario(
            vec![DynamicObstacle {
                cell: p(4, 1),
                appears_at_step: 2,
            }],
            2,
        );
        for planner in [
            &AstarPlanner::default() as &dyn Planner,
            &GroundedPlanner {
                scorer: OracleScorer,
                config: PlannerConfig::default(),
            },
        ] {
            let rec = execute(&s, planner).unwrap();
            assert_eq!(rec.replan_count, 1, "{}", planner.id());
            assert!(!rec.collided);
            assert!(rec.reached_goal);
            assert_eq!(rec.steps_taken, 2 + 2 + 2 + 8 + 2);
            assert!(!rec.visited.contains(&p(4, 1)));
        }
    }

    #[test]
    fn unsensable_obstacle_causes_collision() {
        // tick 3 moves the robot from (2,1) onto (3,1), the same tick the
        // obstacle appears there. After tick 2 it was not yet materialized.
        let s = corridor_scenario(
            vec![DynamicObstacle {
                cell: p(3, 1),
                appears_at_step: 3,
            }],
            1,
        );
        let rec = execute(&s, &AstarPlanner::default()).unwrap();
        assert!(rec.collided);
        assert!(!rec.reached_goal);
        assert_eq!(rec.visited.last(), Some(&p(3, 1)));
        assert_eq!(rec.replan_count, 0);
    }

    #[test]
    fn sealed_goal_fails_without_collision() {
        let s = corridor_scenario(
            vec![
                DynamicObstacle {
                    cell: p(7, 1),
                    appears_at_step: 0,
                },
                DynamicObstacle {
                    cell: p(8, 2),
                    appears_at_step: 0,
                },
            ],
            1,
        );
        let rec = execute(
            &s,
            &GroundedPlanner {
                scorer: MockScorer::new(0.5).unwrap(),
                config: PlannerConfig::default(),
            },
        )
        .unwrap();
        assert!(!rec.reached_goal);
        assert!(!rec.collided);
        assert!(rec.failure.is_some());
    }

    #[test]
    fn working_map_only_gains_obstacles() {
        let s = corridor_scenario(
            vec![
                DynamicObstacle {
                    cell: p(4, 1),
                    appears_at_step: 2,
                },
                DynamicObstacle {
                    cell: p(6, 3),
                    appears_at_step: 30,
                },
            ],
            2,
        );
        let rec = execute(&s, &AstarPlanner::default()).unwrap();
        for q in s.map.poses() {
            if s.map.get(q) == Some(CellState::Occupied) {
                assert_eq!(rec.working_map.get(q), Some(CellState::Occupied));
            }
        }
        assert_eq!(rec.working_map.get(p(4, 1)), Some(CellState::Occupied));
    }

    #[test]
    fn execution_is_deterministic() {
        let s = corridor_scenario(
            vec![DynamicObstacle {
                cell: p(4, 1),
                appears_at_step: 2,
            }],
            2,
        );
        let planner = RrtPlanner {
            params: RrtParams::with_seed(5),
        };
        let a = execute(&s, &planner).unwrap();
        let b = execute(&s, &planner).unwrap();
        assert_eq!(a.visited, b.visited);
        assert_eq!(a.replan_count, b.replan_count);
    }

    #[test]
    fn validation_rules() {
        let s = Scenario::fixed("v", load_map("3 2 1.0\n.#.\n...\n").unwrap(), p(0, 0), p(2, 0));
        let good = [p(0, 0), p(0, 1), p(1, 1), p(2, 1), p(2, 0)];
        assert_eq!(validate_external_path(&s, &good), Ok(()));
        assert_eq!(
            validate_external_path(&s, &[p(0, 0), p(1, 1), p(2, 1), p(2, 0)]),
            Err(Violation {
                rule: PathRule::Adjacency,
                index: 1
            })
        );
        assert_eq!(
            validate_external_path(&s, &good[..4]),
            Err(Violation {
                rule: PathRule::Goal,
                index: 3
            })
        );
        assert_eq!(
            validate_external_path(&s, &[p(0, 0), p(1, 0), p(2, 0)]),
            Err(Violation {
                rule: PathRule::Freeness,
                index: 1
            })
        );
        assert_eq!(
            validate_external_path(&s, &good[1..]),
            Err(Violation {
                rule: PathRule::StartAnchor,
                index: 0
            })
        );
        assert_eq!(
            validate_external_path(&s, &[]),
            Err(Violation {
                rule: PathRule::Empty,
                index: 0
            })
        );
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut s = corridor_scenario(vec![], 1);
        s.sensing_radius = 0;
        assert!(execute(&s, &AstarPlanner::default()).is_err());
    }

    #[test]
    fn reached_goal_implies_valid_timed_path() {
        let s = corridor_scenario(
            vec![
                DynamicObstacle {
                    cell: p(4, 1),
                    appears_at_step: 2,
                },
                DynamicObstacle {
                    cell: p(2, 3),
                    appears_at_step: 9,
                },
            ],
            2,
        );
        let rec = execute(
            &s,
            &GroundedPlanner {
                scorer: OracleScorer,
                config: PlannerConfig::default(),
            },
        )
        .unwrap();
        assert!(rec.reached_goal);
        assert_eq!(validate_external_path(&s, &rec.visited), Ok(()));
        for (tick, cell) in rec.visited.iter().enumerate() {
            assert!(world_at(&s, tick as u32).is_free(*cell), "tick {tick} at {cell}");
        }
    }
}
