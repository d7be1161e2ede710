//! Benchmark harness: runs planners on scenarios through the simulator,
//! records per-trial rows and aggregates them.

mod plot;
mod suite;

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use plot::{plot_trajectories, PlotError, CELL_PX};
pub use suite::{bundled_suite_path, parse_connectivity, Suite, SUITE_FORMAT};

use crate::classical::{PlannedPath, RrtParams};
use crate::gridmap::Connectivity;
use crate::grounded::PlannerConfig;
use crate::planner::{AstarPlanner, Backend, FullPathPlanner, GroundedPlanner, Planner, PlannerKind, RrtPlanner};
use crate::scorer::remote::{CassetteTransport, ChatTransport, UreqTransport};
use crate::scorer::{ChatEndpointConfig, MockScorer, OracleScorer, RemoteError, RemoteScorer};
use crate::simulator::{execute, validate_external_path, Scenario, ScenarioError, SimError};

pub const CSV_HEADER: &str =
    "planner_id,scenario_id,seed,planning_time_ms,scorer_wall_time_ms,correct,path_length_m,replan_count";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown planner: {0}")]
    UnknownPlanner(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("remote scorer: {0}")]
    Remote(#[from] RemoteError),
    #[error("cannot access {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl From<SimError> for BenchError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(s) => BenchError::Scenario(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RemoteSettings {
    pub endpoint: ChatEndpointConfig,
    /// Live requests are refused unless this is set.
    pub allow_network: bool,
    /// Replay file; when present no request leaves the process.
    pub cassette: Option<PathBuf>,
}

/// Everything needed to instantiate any planner family.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSettings {
    pub tau: f64,
    pub grounded: PlannerConfig,
    /// Base parameters; the seed is replaced per trial.
    pub rrt: RrtParams,
    pub connectivity: Connectivity,
    pub remote: RemoteSettings,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            tau: 0.5,
            grounded: PlannerConfig::default(),
            rrt: RrtParams::default(),
            connectivity: Connectivity::Four,
            remote: RemoteSettings::default(),
        }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<(), BenchError> {
        MockScorer::new(self.tau).map_err(|e| BenchError::Config(e.to_string()))?;
        self.grounded.validate().map_err(BenchError::Config)?;
        self.rrt.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.remote.endpoint.validate()?;
        Ok(())
    }
}

fn remote_scorer(settings: &RemoteSettings) -> Result<RemoteScorer<Box<dyn ChatTransport>>, BenchError> {
    let cfg = settings.endpoint.clone();
    if let Some(path) = &settings.cassette {
        let cassette = CassetteTransport::load(path).map_err(|e| BenchError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let key = std::env::var(&cfg.api_key_env).unwrap_or_default();
        let transport: Box<dyn ChatTransport> = Box::new(cassette);
        return Ok(RemoteScorer::new(cfg, key, transport)?.with_sleeper(|_| {}));
    }
    if !settings.allow_network {
        return Err(BenchError::Config(
            "the remote scorer needs --allow-network (or a cassette to replay)".into(),
        ));
    }
    let key = std::env::var(&cfg.api_key_env)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| RemoteError::AuthMissing(cfg.api_key_env.clone()))?;
    let transport: Box<dyn ChatTransport> = Box::new(UreqTransport::default());
    Ok(RemoteScorer::new(cfg, key, transport)?)
}

/// Instantiates a planner. `seed` drives RRT sampling; the other families
/// are deterministic.
pub fn build_planner(kind: PlannerKind, seed: u64, settings: &PlannerSettings) -> Result<Box<dyn Planner>, BenchError> {
    let mock = || MockScorer::new(settings.tau).map_err(|e| BenchError::Config(e.to_string()));
    let grounded = settings.grounded.clone();
    Ok(match kind {
        PlannerKind::Astar => Box::new(AstarPlanner {
            connectivity: settings.connectivity,
        }),
        PlannerKind::Rrt => Box::new(RrtPlanner {
            params: RrtParams { seed, ..settings.rrt },
        }),
        PlannerKind::Grounded(Backend::Mock) => Box::new(GroundedPlanner {
            scorer: mock()?,
            config: grounded,
        }),
        PlannerKind::Grounded(Backend::Oracle) => Box::new(GroundedPlanner {
            scorer: OracleScorer,
            config: grounded,
        }),
        PlannerKind::Grounded(Backend::Remote) => Box::new(GroundedPlanner {
            scorer: remote_scorer(&settings.remote)?,
            config: grounded,
        }),
        PlannerKind::FullPath(Backend::Mock) => Box::new(FullPathPlanner::new(mock()?)),
        PlannerKind::FullPath(Backend::Oracle) => Box::new(FullPathPlanner::new(OracleScorer)),
        PlannerKind::FullPath(Backend::Remote) => Box::new(FullPathPlanner::new(remote_scorer(&settings.remote)?)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub planner_id: String,
    pub scenario_id: String,
    pub seed: u64,
    /// Wall time inside planner calls minus time inside scorer backends.
    pub planning_time_ms: f64,
    pub scorer_wall_time_ms: f64,
    pub correct: bool,
    pub path_length_m: f64,
    pub replan_count: u32,
    /// Why the trial is not correct.
    #[serde(skip)]
    pub note: Option<String>,
    #[serde(skip)]
    pub visited: PlannedPath,
}

impl TrialResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{},{:.6},{}",
            self.planner_id,
            self.scenario_id,
            self.seed,
            self.planning_time_ms,
            self.scorer_wall_time_ms,
            self.correct,
            self.path_length_m,
            self.replan_count
        )
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Executes one trial. Planner failures yield `correct == false`; only
/// configuration problems are errors.
pub fn run_trial(
    scenario: &Scenario,
    kind: PlannerKind,
    seed: u64,
    settings: &PlannerSettings,
) -> Result<TrialResult, BenchError> {
    let planner = build_planner(kind, seed, settings)?;
    let rec = execute(scenario, planner.as_ref())?;
    let violation = validate_external_path(scenario, &rec.visited).err();
    let correct = rec.reached_goal && !rec.collided && violation.is_none();
    let note = if correct {
        None
    } else if rec.collided {
        Some(format!(
            "collision at {}",
            rec.visited.last().copied().unwrap_or(scenario.start)
        ))
    } else {
        rec.failure.clone().or_else(|| violation.map(|v| v.to_string()))
    };
    let visited = PlannedPath::new(rec.visited, scenario.map.resolution());
    Ok(TrialResult {
        planner_id: kind.to_string(),
        scenario_id: scenario.id.clone(),
        seed,
        planning_time_ms: ms(rec.planning_time.saturating_sub(rec.scorer_time)),
        scorer_wall_time_ms: ms(rec.scorer_time),
        correct,
        path_length_m: visited.cell_cost() * visited.resolution,
        replan_count: rec.replan_count,
        note,
        visited,
    })
}

/// First 8 bytes (big endian) of SHA-256 over the NUL-separated ids.
pub fn trial_seed(scenario_id: &str, planner_id: &str, trial_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(scenario_id.as_bytes());
    h.update([0u8]);
    h.update(planner_id.as_bytes());
    h.update([0u8]);
    h.update(trial_index.to_string().as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerSummary {
    pub planner_id: String,
    pub trials: usize,
    pub correct: usize,
    pub mean_planning_time_ms: f64,
    pub median_planning_time_ms: f64,
    pub mean_scorer_wall_time_ms: f64,
    pub correctness_rate: f64,
    /// Over correct trials only.
    pub mean_path_length_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub planners: Vec<PlannerSummary>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => values[n / 2],
        _ => (values[n / 2 - 1] + values[n / 2]) / 2.0,
    }
}

/// Per-planner aggregates, planners in order of first appearance.
pub fn aggregate(rows: &[TrialResult]) -> AggregateReport {
    let mut ids: Vec<&str> = Vec::new();
    for r in rows {
        if !ids.contains(&r.planner_id.as_str()) {
            ids.push(&r.planner_id);
        }
    }
    let planners = ids
        .into_iter()
        .map(|id| {
            let mine: Vec<&TrialResult> = rows.iter().filter(|r| r.planner_id == id).collect();
            let n = mine.len();
            let mut times: Vec<f64> = mine.iter().map(|r| r.planning_time_ms).collect();
            let lengths: Vec<f64> = mine.iter().filter(|r| r.correct).map(|r| r.path_length_m).collect();
            PlannerSummary {
                planner_id: id.to_string(),
                trials: n,
                correct: lengths.len(),
                mean_planning_time_ms: times.iter().sum::<f64>() / n as f64,
                median_planning_time_ms: median(&mut times),
                mean_scorer_wall_time_ms: mine.iter().map(|r| r.scorer_wall_time_ms).sum::<f64>() / n as f64,
                correctness_rate: lengths.len() as f64 / n as f64,
                mean_path_length_m: (!lengths.is_empty()).then(|| lengths.iter().sum::<f64>() / lengths.len() as f64),
            }
        })
        .collect();
    AggregateReport { planners }
}

pub fn write_csv(rows: &[TrialResult], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub const REPORT_HEADER: &str = "\
# gridplan benchmark report
# correctness is per trial: the executed path reaches the goal without collision
#   and passes structural validation (start anchor, 4-adjacency, free cells, goal)
# planning_time excludes time spent inside scorer backends (see scorer_ms)
# mean path length is taken over correct trials only
# published reference figures, listed for reference only and NOT reproduction targets:
#   processing time 10 ms (grounded) / 72 ms (A*) / 21 ms (RRT)
#   correctness 81% (grounded) / 95% (A*) / 87% (RRT)
#   mean path length 6.34 m (grounded)
";

/// Structured-text report: header, aggregate table, failed trials.
pub fn render_report(report: &AggregateReport, rows: &[TrialResult]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    s.push_str(&format!(
        "{:<18} {:>6} {:>12} {:>14} {:>11} {:>16} {:>10}\n",
        "planner", "trials", "mean_time_ms", "median_time_ms", "correctness", "mean_path_len_m", "scorer_ms"
    ));
    for p in &report.planners {
        let len = p
            .mean_path_length_m
            .map_or_else(|| "n/a".to_string(), |l| format!("{l:.3}"));
        s.push_str(&format!(
            "{:<18} {:>6} {:>12.3} {:>14.3} {:>10.1}% {:>16} {:>10.3}\n",
            p.planner_id,
            p.trials,
            p.mean_planning_time_ms,
            p.median_planning_time_ms,
            100.0 * p.correctness_rate,
            len,
            p.mean_scorer_wall_time_ms
        ));
    }
    let failed: Vec<&TrialResult> = rows.iter().filter(|r| !r.correct).collect();
    if !failed.is_empty() {
        s.push_str("\nincorrect trials:\n");
        for r in failed {
            s.push_str(&format!(
                "  {} on {} (seed {}): {}\n",
                r.planner_id,
                r.scenario_id,
                r.seed,
                r.note.as_deref().unwrap_or("unknown")
            ));
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub rows: Vec<TrialResult>,
    pub report: AggregateReport,
}

/// Runs every (scenario, planner, trial) triple on a pool of `parallelism`
/// threads. Rows come back in that nesting order; when `sink` is given the
/// CSV is written before aggregation.
pub fn run_suite(
    scenarios: &[Scenario],
    planners: &[PlannerKind],
    trials_per_pair: usize,
    parallelism: usize,
    settings: &PlannerSettings,
    sink: Option<&mut dyn Write>,
) -> Result<SuiteOutcome, BenchError> {
    if scenarios.is_empty() || planners.is_empty() || trials_per_pair == 0 || parallelism == 0 {
        return Err(BenchError::Config(
            "scenario, planner, trial and thread counts must be at least 1".into(),
        ));
    }
    settings.validate()?;
    for s in scenarios {
        s.validate()?;
    }
    for &kind in planners {
        build_planner(kind, 0, settings)?;
    }
    let jobs: Vec<(&Scenario, PlannerKind, u64)> = scenarios
        .iter()
        .flat_map(|s| {
            planners.iter().flat_map(move |&k| {
                let id = k.to_string();
                (0..trials_per_pair).map(move |i| (s, k, trial_seed(&s.id, &id, i)))
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, k, seed)| run_trial(s, k, seed, settings))
            .collect::<Result<Vec<_>, _>>()
    })?;
    if let Some(out) = sink {
        write_csv(&rows, out).map_err(|e| BenchError::Io {
            path: PathBuf::from("<csv>"),
            message: e.to_string(),
        })?;
    }
    let report = aggregate(&rows);
    Ok(SuiteOutcome { rows, report })
}

/// Executed paths of trial 0 of each planner on `scenario_id`, labeled by
/// planner id, for plotting.
pub fn first_trial_paths(rows: &[TrialResult], scenario_id: &str) -> Vec<(String, PlannedPath)> {
    let mut out: Vec<(String, PlannedPath)> = Vec::new();
    for r in rows.iter().filter(|r| r.scenario_id == scenario_id) {
        if !out.iter().any(|(id, _)| *id == r.planner_id) {
            out.push((r.planner_id.clone(), r.visited.clone()));
        }
    }
    out
}

/// Drops the two timing columns of a CSV produced by [`write_csv`].
pub fn strip_timing_columns(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| *i != 3 && *i != 4)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
