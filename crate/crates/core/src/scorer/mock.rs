use super::{PathProposer, ScorerError, TaskScorer, TaskScorerQuery};
use crate::gridmap::{GridPose, OccupancyGrid};
use crate::grounded::{self, Instruction, PlannerConfig};
use crate::translator::render_coordinate_list;

/// Deterministic stand-in for a language model: a Boltzmann preference for
/// candidates closer (in Manhattan distance) to the goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockScorer {
    tau: f64,
}

impl MockScorer {
    pub fn new(tau: f64) -> Result<Self, ScorerError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ScorerError::Backend(format!(
                "mock temperature must be positive, got {tau}"
            )));
        }
        Ok(MockScorer { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `exp(-(d_k - min_j d_j) / tau)`; the best candidate always scores 1.
    pub fn scores(&self, candidates: &[GridPose; 4], goal: GridPose) -> [f64; 4] {
        let dist = candidates.map(|c| f64::from(c.manhattan(goal)));
        let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
        dist.map(|d| (-(d - best) / self.tau).exp())
    }
}

impl TaskScorer for MockScorer {
    fn name(&self) -> &str {
        "mock"
    }

    fn score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], ScorerError> {
        Ok(self.scores(&query.candidates, query.instruction.goal))
    }
}

impl PathProposer for MockScorer {
    fn name(&self) -> &str {
        "mock"
    }

    /// Rolls out the stepwise planner with this scorer and reports whatever
    /// path it produced, including partial paths from failed rollouts.
    fn propose_path(
        &self,
        grid: &OccupancyGrid,
        start: GridPose,
        instruction: &Instruction,
    ) -> Result<String, ScorerError> {
        let config = PlannerConfig::default();
        let waypoints = match grounded::plan(self, grid, start, instruction, &config) {
            Ok(done) => done.path.waypoints,
            Err(failure) => failure.partial.waypoints,
        };
        Ok(render_coordinate_list(&waypoints))
    }
}
