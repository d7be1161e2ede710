use super::{PathProposer, ScorerError, TaskScorer, TaskScorerQuery};
use crate::classical::{astar, SearchResult};
use crate::gridmap::{Connectivity, GridPose, OccupancyGrid};
use crate::grounded::Instruction;
use crate::translator::render_coordinate_list;

/// Ground-truth scorer: 1 for every move that lowers the optimal
/// 4-connected cost-to-goal by exactly one, 0 otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleScorer;

fn cost_to_goal(grid: &OccupancyGrid, from: GridPose, goal: GridPose) -> Option<usize> {
    match astar(grid, from, goal, Connectivity::Four) {
        Ok(SearchResult::Found(path)) => Some(path.steps()),
        _ => None,
    }
}

impl OracleScorer {
    pub fn scores(grid: &OccupancyGrid, state: GridPose, goal: GridPose, candidates: &[GridPose; 4]) -> [f64; 4] {
        let Some(here) = cost_to_goal(grid, state, goal) else {
            return [0.0; 4];
        };
        candidates.map(|c| match cost_to_goal(grid, c, goal) {
            Some(cost) if cost + 1 == here => 1.0,
            _ => 0.0,
        })
    }
}

impl TaskScorer for OracleScorer {
    fn name(&self) -> &str {
        "oracle"
    }

    fn score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], ScorerError> {
        Ok(Self::scores(
            query.grid,
            query.state,
            query.instruction.goal,
            &query.candidates,
        ))
    }
}

impl PathProposer for OracleScorer {
    fn name(&self) -> &str {
        "oracle"
    }

    /// Answers with the A* path. An unreachable goal yields an empty `path:`
    /// line, which the reply grammar rejects.
    fn propose_path(
        &self,
        grid: &OccupancyGrid,
        start: GridPose,
        instruction: &Instruction,
    ) -> Result<String, ScorerError> {
        let waypoints = match astar(grid, start, instruction.goal, Connectivity::Four) {
            Ok(SearchResult::Found(path)) => path.waypoints,
            _ => Vec::new(),
        };
        Ok(render_coordinate_list(&waypoints))
    }
}
