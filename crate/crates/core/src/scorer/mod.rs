//! Task-grounding scorers: backends that rate the four candidate moves for
//! how well each advances the instruction.
//!
//! Every backend also implements [`PathProposer`], the one-shot mode that
//! answers with a whole coordinate list in the reply grammar.

mod mock;
mod oracle;
pub mod remote;

use thiserror::Error;

pub use mock::MockScorer;
pub use oracle::OracleScorer;
pub use remote::{ChatEndpointConfig, RemoteError, RemoteScorer};

use crate::gridmap::{GridPose, OccupancyGrid};
use crate::grounded::{ActionId, Instruction};

/// Everything a scorer may look at for one planning step. Candidates are
/// raw geometry: they may be walls or lie outside the map.
#[derive(Debug, Clone, Copy)]
pub struct TaskScorerQuery<'a> {
    pub instruction: &'a Instruction,
    pub grid: &'a OccupancyGrid,
    pub state: GridPose,
    /// Moves in tie-break order, paired index-wise with `candidates`.
    pub actions: [ActionId; 4],
    pub candidates: [GridPose; 4],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("scorer returned invalid score {value} for candidate {index}")]
    InvalidScore { index: usize, value: f64 },
    #[error("scorer call took {elapsed_ms} ms, over the {deadline_ms} ms deadline")]
    DeadlineExceeded { elapsed_ms: u128, deadline_ms: u128 },
    #[error("{0}")]
    Backend(String),
}

/// Produces four non-negative raw scores, one per query candidate.
pub trait TaskScorer {
    fn name(&self) -> &str;
    fn score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], ScorerError>;
}

/// One-shot whole-path backend. Returns the raw reply text, which callers
/// parse with `translator::parse_coordinate_list`.
pub trait PathProposer {
    fn name(&self) -> &str;
    fn propose_path(
        &self,
        grid: &OccupancyGrid,
        start: GridPose,
        instruction: &Instruction,
    ) -> Result<String, ScorerError>;
}

impl<T: TaskScorer + ?Sized> TaskScorer for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], ScorerError> {
        (**self).score(query)
    }
}

impl<T: TaskScorer + ?Sized> TaskScorer for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], ScorerError> {
        (**self).score(query)
    }
}
