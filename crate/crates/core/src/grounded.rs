//! Probabilistic step planner that combines task grounding and world
//! grounding.
//!
//! At every state the four cardinal successors are scored twice: a task
//! scorer says how useful each move is for the instruction (normalized to a
//! distribution over the moves), and [`affordance`] says how likely the move
//! is to succeed on the map. The planner takes the move maximizing their
//! product, appends the successor to the path and repeats until the goal is
//! reached.

use std::collections::HashMap;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classical::PlannedPath;
use crate::gridmap::{GridPose, OccupancyGrid};
use crate::scorer::{ScorerError, TaskScorer, TaskScorerQuery};

/// Natural-language goal plus the goal cell it resolves to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub goal: GridPose,
}

impl Instruction {
    pub fn new(text: impl Into<String>, goal: GridPose) -> Self {
        Instruction {
            text: text.into(),
            goal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionId {
    Up,
    Right,
    Left,
    Down,
}

impl ActionId {
    pub const ALL: [ActionId; 4] = [ActionId::Up, ActionId::Right, ActionId::Left, ActionId::Down];

    pub fn action(self) -> Action {
        match self {
            ActionId::Up => Action {
                id: self,
                delta: (0, -1),
                description: "move up one cell",
            },
            ActionId::Right => Action {
                id: self,
                delta: (1, 0),
                description: "move right one cell",
            },
            ActionId::Left => Action {
                id: self,
                delta: (-1, 0),
                description: "move left one cell",
            },
            ActionId::Down => Action {
                id: self,
                delta: (0, 1),
                description: "move down one cell",
            },
        }
    }

    /// Position in the reply grammar's fixed `up right left down` order.
    pub fn grammar_index(self) -> usize {
        match self {
            ActionId::Up => 0,
            ActionId::Right => 1,
            ActionId::Left => 2,
            ActionId::Down => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionId::Up => "up",
            ActionId::Right => "right",
            ActionId::Left => "left",
            ActionId::Down => "down",
        }
    }
}

/// A grid move with its language label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Action {
    pub id: ActionId,
    pub delta: (i32, i32),
    pub description: &'static str,
}

impl Action {
    pub fn apply(&self, s: GridPose) -> GridPose {
        s.offset(self.delta.0, self.delta.1)
    }
}

/// The four moves in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSet([Action; 4]);

impl ActionSet {
    pub fn ordered(order: [ActionId; 4]) -> Self {
        ActionSet(order.map(ActionId::action))
    }

    pub fn actions(&self) -> &[Action; 4] {
        &self.0
    }

    pub fn ids(&self) -> [ActionId; 4] {
        self.0.map(|a| a.id)
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        ActionSet::ordered(ActionId::ALL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredAction {
    pub action: ActionId,
    pub candidate: GridPose,
    /// Task grounding: normalized scorer output.
    pub p_gpt: f64,
    /// World grounding: [`affordance`] of the move.
    pub p_util: f64,
    /// `p_gpt * p_util`.
    pub p_combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Step budget; `None` means `4 * (width + height)` of the planning grid.
    pub max_steps: Option<usize>,
    /// Factor applied to `p_combined` once per earlier visit of a candidate.
    /// 1.0 disables the penalty.
    pub revisit_penalty: f64,
    pub tie_break: [ActionId; 4],
    /// Upper bound on a single scorer call.
    #[serde(with = "opt_millis")]
    pub scorer_deadline: Option<Duration>,
}

mod opt_millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&(d.as_millis() as u64)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_steps: None,
            revisit_penalty: 0.5,
            tie_break: ActionId::ALL,
            scorer_deadline: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == Some(0) {
            return Err("max_steps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.revisit_penalty) {
            return Err(format!("revisit_penalty {} is outside [0, 1]", self.revisit_penalty));
        }
        let mut seen = self.tie_break.map(ActionId::grammar_index);
        seen.sort_unstable();
        if seen != [0, 1, 2, 3] {
            return Err("tie_break must list each move exactly once".into());
        }
        Ok(())
    }

    pub fn step_budget(&self, grid: &OccupancyGrid) -> usize {
        self.max_steps.unwrap_or(4 * (grid.width() + grid.height()))
    }
}

/// World grounding of `action` from `s`: 0 when the successor is not a Free
/// cell, 1 when all four of its own neighbors are Free, 0.8 otherwise.
pub fn affordance(grid: &OccupancyGrid, s: GridPose, action: &Action) -> f64 {
    let candidate = action.apply(s);
    if !grid.is_free(candidate) {
        return 0.0;
    }
    let open = ActionId::ALL
        .iter()
        .all(|id| grid.is_free(id.action().apply(candidate)));
    if open {
        1.0
    } else {
        0.8
    }
}

/// Normalizes raw scores into a distribution over the moves. An all-zero
/// input becomes uniform.
pub fn normalize_scores(raw: &[f64; 4]) -> [f64; 4] {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return [0.25; 4];
    }
    // dividing by the max first keeps the sum finite for huge raw scores
    let scaled = raw.map(|v| v / max);
    let total: f64 = scaled.iter().sum();
    scaled.map(|v| v / total)
}

pub fn score_candidates<S: TaskScorer + ?Sized>(
    scorer: &S,
    instruction: &Instruction,
    grid: &OccupancyGrid,
    s: GridPose,
    actions: &ActionSet,
) -> Result<[ScoredAction; 4], ScorerError> {
    let candidates = actions.actions().map(|a| a.apply(s));
    let query = TaskScorerQuery {
        instruction,
        grid,
        state: s,
        actions: actions.ids(),
        candidates,
    };
    let raw = scorer.score(&query)?;
    combine_scores(grid, s, actions, &raw)
}

/// Combines already-obtained raw scores with the affordances.
pub fn combine_scores(
    grid: &OccupancyGrid,
    s: GridPose,
    actions: &ActionSet,
    raw: &[f64; 4],
) -> Result<[ScoredAction; 4], ScorerError> {
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(ScorerError::InvalidScore { index, value });
    }
    let p_gpt = normalize_scores(raw);
    let mut i = 0;
    Ok(actions.actions().map(|a| {
        let p_util = affordance(grid, s, &a);
        let out = ScoredAction {
            action: a.id,
            candidate: a.apply(s),
            p_gpt: p_gpt[i],
            p_util,
            p_combined: p_gpt[i] * p_util,
        };
        i += 1;
        out
    }))
}

/// Visit counts per cell along the current plan.
pub type Visits = HashMap<GridPose, u32>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Chosen(ScoredAction),
    Stuck,
}

/// Penalized score of one entry: `p_combined * revisit_penalty^visits`.
pub fn adjusted_score(entry: &ScoredAction, visits: &Visits, config: &PlannerConfig) -> f64 {
    let n = visits.get(&entry.candidate).copied().unwrap_or(0);
    if n == 0 {
        entry.p_combined
    } else {
        entry.p_combined * config.revisit_penalty.powi(n.min(i32::MAX as u32) as i32)
    }
}

/// Argmax of the penalized scores. Ties go to the entry whose move comes
/// first in `config.tie_break`; `Stuck` when every penalized score is 0.
pub fn select_action(scored: &[ScoredAction; 4], visits: &Visits, config: &PlannerConfig) -> Selection {
    let rank = |id: ActionId| config.tie_break.iter().position(|&t| t == id).unwrap_or(usize::MAX);
    let mut order: [usize; 4] = [0, 1, 2, 3];
    order.sort_by_key(|&i| rank(scored[i].action));

    let mut best: Option<(usize, f64)> = None;
    for i in order {
        let v = adjusted_score(&scored[i], visits, config);
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    match best {
        Some((i, _)) => Selection::Chosen(scored[i]),
        None => Selection::Stuck,
    }
}

/// One loop iteration, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: GridPose,
    pub candidates: [ScoredAction; 4],
    pub chosen: Option<ActionId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundedPlan {
    pub path: PlannedPath,
    pub trace: Vec<StepRecord>,
    pub scorer_calls: usize,
    pub scorer_time: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FailureKind {
    #[error("no move has positive score")]
    Stuck,
    #[error("step limit of {0} reached")]
    StepLimit(usize),
    #[error("scorer failed: {0}")]
    Scorer(ScorerError),
    #[error("invalid planner input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind} after {} steps", partial.steps())]
pub struct PlanFailure {
    pub kind: FailureKind,
    /// Path walked before the failure; every prefix is a valid path.
    pub partial: PlannedPath,
    pub trace: Vec<StepRecord>,
    pub scorer_calls: usize,
    pub scorer_time: Duration,
}

/// Runs the score, select, step loop from `start` until the instruction's
/// goal is reached.
// the failure carries the partial path and trace by value
#[allow(clippy::result_large_err)]
pub fn plan<S: TaskScorer + ?Sized>(
    scorer: &S,
    grid: &OccupancyGrid,
    start: GridPose,
    instruction: &Instruction,
    config: &PlannerConfig,
) -> Result<GroundedPlan, PlanFailure> {
    let mut path = PlannedPath::new(vec![start], grid.resolution());
    let mut trace: Vec<StepRecord> = Vec::new();
    let mut scorer_calls = 0;
    let mut scorer_time = Duration::ZERO;

    macro_rules! fail {
        ($kind:expr) => {
            return Err(PlanFailure {
                kind: $kind,
                partial: path,
                trace,
                scorer_calls,
                scorer_time,
            })
        };
    }

    if let Err(msg) = config.validate() {
        fail!(FailureKind::InvalidInput(msg));
    }
    if !grid.is_free(start) {
        fail!(FailureKind::InvalidInput(format!("start {start} is not a free cell")));
    }
    if !grid.is_free(instruction.goal) {
        fail!(FailureKind::InvalidInput(format!(
            "goal {} is not a free cell",
            instruction.goal
        )));
    }
    if instruction.text.trim().is_empty() {
        fail!(FailureKind::InvalidInput("instruction text is empty".into()));
    }

    let actions = ActionSet::ordered(config.tie_break);
    let budget = config.step_budget(grid);
    let mut visits = Visits::new();
    visits.insert(start, 1);
    let mut current = start;

    while current != instruction.goal {
        if scorer_calls >= budget {
            fail!(FailureKind::StepLimit(budget));
        }
        let t0 = Instant::now();
        let scored = score_candidates(scorer, instruction, grid, current, &actions);
        let elapsed = t0.elapsed();
        scorer_calls += 1;
        scorer_time += elapsed;
        let scored = match scored {
            Ok(s) => s,
            Err(e) => fail!(FailureKind::Scorer(e)),
        };
        if let Some(deadline) = config.scorer_deadline {
            if elapsed > deadline {
                fail!(FailureKind::Scorer(ScorerError::DeadlineExceeded {
                    elapsed_ms: elapsed.as_millis(),
                    deadline_ms: deadline.as_millis(),
                }));
            }
        }
        let selection = select_action(&scored, &visits, config);
        trace.push(StepRecord {
            step: trace.len(),
            state: current,
            candidates: scored,
            chosen: match selection {
                Selection::Chosen(c) => Some(c.action),
                Selection::Stuck => None,
            },
        });
        match selection {
            Selection::Chosen(choice) => {
                current = choice.candidate;
                *visits.entry(current).or_insert(0) += 1;
                path.waypoints.push(current);
            }
            Selection::Stuck => fail!(FailureKind::Stuck),
        }
    }

    Ok(GroundedPlan {
        path,
        trace,
        scorer_calls,
        scorer_time,
    })
}

/// Plans again from the robot's current cell on an updated map, with a fresh
/// visit history.
#[allow(clippy::result_large_err)]
pub fn replan<S: TaskScorer + ?Sized>(
    scorer: &S,
    grid: &OccupancyGrid,
    current: GridPose,
    instruction: &Instruction,
    config: &PlannerConfig,
) -> Result<GroundedPlan, PlanFailure> {
    plan(scorer, grid, current, instruction, config)
}

/// Writes one JSON object per step record.
pub fn write_trace_jsonl<W: Write>(trace: &[StepRecord], mut out: W) -> io::Result<()> {
    for record in trace {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
