//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 no path / planning failure.
//!
//! Settings resolve as flags, then `GRIDPLAN_*` environment variables, then
//! the `--config` TOML file, then built-in defaults.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{
    self, bundled_suite_path, parse_connectivity, plot_trajectories, BenchError, PlannerSettings, RemoteSettings, Suite,
};
use crate::gridmap::{load_map, random_map, serialize_map, GridPose};
use crate::grounded::{write_trace_jsonl, Instruction};
use crate::planner::{Backend, PlanError, PlannerKind};
use crate::scorer::ChatEndpointConfig;
use crate::simulator::{validate_on_map, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_PATH: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gridplan",
    version,
    about = "Grid path planning with language-scored action selection"
)]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true, env = "GRIDPLAN_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan one path and print its waypoints.
    Plan(PlanArgs),
    /// Run a benchmark suite and write CSV, report and plots.
    Bench(BenchArgs),
    /// Write random occupancy maps.
    GenMaps(GenMapsArgs),
}

/// Options shared by `plan` and `bench`.
#[derive(Debug, Args, Default)]
pub struct ScorerArgs {
    /// Temperature of the mock scorer.
    #[arg(long, env = "GRIDPLAN_TAU")]
    pub tau: Option<f64>,
    /// Grounded-planner step budget (default 4 * (width + height)).
    #[arg(long, env = "GRIDPLAN_MAX_STEPS")]
    pub max_steps: Option<usize>,
    /// Permit live requests to the remote scorer.
    #[arg(long)]
    pub allow_network: bool,
    /// Replay remote-scorer responses from a JSONL cassette.
    #[arg(long, env = "GRIDPLAN_CASSETTE")]
    pub cassette: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, value_parser = parse_pose)]
    pub start: GridPose,
    #[arg(long, value_parser = parse_pose)]
    pub goal: GridPose,
    /// astar, rrt, grounded or fullpath (or a full id such as grounded:oracle).
    #[arg(long, env = "GRIDPLAN_PLANNER")]
    pub planner: Option<String>,
    /// mock, oracle or remote.
    #[arg(long, env = "GRIDPLAN_SCORER")]
    pub scorer: Option<String>,
    #[arg(long, env = "GRIDPLAN_SEED")]
    pub seed: Option<u64>,
    /// 4 or 8 (A* only).
    #[arg(long, env = "GRIDPLAN_CONNECTIVITY")]
    pub connectivity: Option<u8>,
    /// Instruction text given to language scorers.
    #[arg(long)]
    pub instruction: Option<String>,
    /// Directory for the SVG plot and the step trace.
    #[arg(long, env = "GRIDPLAN_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub scorer_args: ScorerArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite file (default: the bundled suite).
    pub suite: Option<PathBuf>,
    #[arg(long, env = "GRIDPLAN_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "GRIDPLAN_PARALLELISM")]
    pub parallelism: Option<usize>,
    #[command(flatten)]
    pub scorer_args: ScorerArgs,
}

#[derive(Debug, Args)]
pub struct GenMapsArgs {
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// `N` or `WxH`.
    #[arg(long, default_value = "20x20", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 0.25)]
    pub density: f64,
    #[arg(long, env = "GRIDPLAN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "GRIDPLAN_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

fn parse_pose(s: &str) -> Result<GridPose, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x = x.trim().parse::<i32>().map_err(|e| format!("bad x in {s:?}: {e}"))?;
    let y = y.trim().parse::<i32>().map_err(|e| format!("bad y in {s:?}: {e}"))?;
    Ok(GridPose::new(x, y))
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok((parse(w)?, parse(h)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub planner: Option<String>,
    pub scorer: Option<String>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub connectivity: Option<u8>,
    pub max_steps: Option<usize>,
    pub revisit_penalty: Option<f64>,
    pub parallelism: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub cassette: Option<PathBuf>,
    pub remote: Option<ChatEndpointConfig>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn no_path(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NO_PATH,
            message: message.into(),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::usage(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::usage(format!("cannot write {}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    let file = match cli.config.as_deref().map(ConfigFile::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a, &file, stdout, stderr),
        Command::Bench(a) => cmd_bench(a, &file, stdout),
        Command::GenMaps(a) => cmd_gen_maps(a, &file, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn settings_from(args: &ScorerArgs, file: &ConfigFile, connectivity: Option<u8>) -> Result<PlannerSettings, Failure> {
    let mut s = PlannerSettings::default();
    if let Some(tau) = args.tau.or(file.tau) {
        s.tau = tau;
    }
    s.grounded.max_steps = args.max_steps.or(file.max_steps);
    if let Some(p) = file.revisit_penalty {
        s.grounded.revisit_penalty = p;
    }
    if let Some(c) = connectivity.or(file.connectivity) {
        s.connectivity = parse_connectivity(c)?;
    }
    s.remote = RemoteSettings {
        endpoint: file.remote.clone().unwrap_or_default(),
        allow_network: args.allow_network,
        cassette: args.cassette.clone().or_else(|| file.cassette.clone()),
    };
    s.validate()?;
    Ok(s)
}

fn resolve_kind(planner: &str, scorer: &str) -> Result<PlannerKind, Failure> {
    let backend = || scorer.parse::<Backend>().map_err(Failure::usage);
    match planner {
        "astar" => Ok(PlannerKind::Astar),
        "rrt" => Ok(PlannerKind::Rrt),
        "grounded" => Ok(PlannerKind::Grounded(backend()?)),
        "fullpath" => Ok(PlannerKind::FullPath(backend()?)),
        other => other.parse().map_err(Failure::usage),
    }
}

fn cmd_plan(a: &PlanArgs, file: &ConfigFile, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let planner = a
        .planner
        .clone()
        .or_else(|| file.planner.clone())
        .unwrap_or_else(|| "grounded".into());
    let scorer = a
        .scorer
        .clone()
        .or_else(|| file.scorer.clone())
        .unwrap_or_else(|| "mock".into());
    let kind = resolve_kind(&planner, &scorer)?;
    let mut settings = settings_from(&a.scorer_args, file, a.connectivity)?;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    settings.rrt.seed = seed;
    let out_dir = a.out_dir.clone().or_else(|| file.out_dir.clone());

    let text =
        fs::read_to_string(&a.map).map_err(|e| Failure::usage(format!("cannot read {}: {e}", a.map.display())))?;
    let grid = load_map(&text).map_err(|e| Failure::usage(format!("{}: {e}", a.map.display())))?;
    for (what, p) in [("start", a.start), ("goal", a.goal)] {
        if !grid.is_free(p) {
            return Err(Failure::usage(format!("{what} {p} is not a free cell of the map")));
        }
    }
    let instruction = Instruction::new(
        a.instruction
            .clone()
            .unwrap_or_else(|| format!("go to the goal cell {}", a.goal)),
        a.goal,
    );
    let planner = bench::build_planner(kind, seed, &settings)?;
    let t0 = Instant::now();
    let attempt = planner.plan(&grid, a.start, &instruction);
    let elapsed = t0.elapsed();

    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        if !attempt.trace.is_empty() {
            let path = dir.join("trace.jsonl");
            let f = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
            write_trace_jsonl(&attempt.trace, std::io::BufWriter::new(f)).map_err(|e| io_failure(&path, e))?;
        }
    }

    let path = match attempt.outcome {
        Ok(p) => p,
        Err(PlanError::NoPath) => return Err(Failure::no_path("no path")),
        Err(PlanError::Grounded { kind, partial }) => {
            let _ = writeln!(stderr, "partial path: {} waypoints", partial.len());
            return Err(Failure::no_path(format!("no path: grounded planner stopped ({kind})")));
        }
        Err(PlanError::Invalid(m)) => return Err(Failure::usage(m)),
        Err(e) => return Err(Failure::no_path(format!("no path: {e}"))),
    };
    if let Err(v) = validate_on_map(&grid, a.start, a.goal, &path.waypoints) {
        // 8-connected A* output is valid under its own connectivity
        if !(kind == PlannerKind::Astar && path.is_valid(&grid, settings.connectivity) && path.end() == Some(a.goal)) {
            return Err(Failure::no_path(format!(
                "no path: planner returned an invalid path ({v})"
            )));
        }
    }
    for w in &path.waypoints {
        writeln!(stdout, "{w}").map_err(|e| Failure::usage(e.to_string()))?;
    }
    let length = path.length().unwrap_or(0.0);
    let _ = writeln!(
        stderr,
        "{}: length {length:.3} m, {} steps, {:.3} ms",
        planner.id(),
        path.steps(),
        elapsed.as_secs_f64() * 1e3
    );
    if let Some(dir) = &out_dir {
        let scenario = Scenario {
            instruction_text: instruction.text.clone(),
            ..Scenario::fixed("plan", grid, a.start, a.goal)
        };
        let svg = plot_trajectories(&scenario, &[(planner.id(), path)]).map_err(|e| Failure::usage(e.to_string()))?;
        let file = dir.join("plan.svg");
        fs::write(&file, svg).map_err(|e| io_failure(&file, e))?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, file: &ConfigFile, stdout: &mut dyn Write) -> Result<(), Failure> {
    let suite_path = a.suite.clone().unwrap_or_else(bundled_suite_path);
    let mut suite = Suite::load(&suite_path)?;
    if let Some(p) = a.parallelism.or(file.parallelism) {
        suite.parallelism = p;
    }
    let args = &a.scorer_args;
    if let Some(tau) = args.tau.or(file.tau) {
        suite.settings.tau = tau;
    }
    if let Some(m) = args.max_steps.or(file.max_steps) {
        suite.settings.grounded.max_steps = Some(m);
    }
    if let Some(c) = args.cassette.clone().or_else(|| file.cassette.clone()) {
        suite.settings.remote.cassette = Some(c);
    }
    suite.settings.remote.allow_network = args.allow_network;
    suite.check_counts()?;
    suite.settings.validate()?;

    let out_dir = a
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("bench_out"));
    fs::create_dir_all(&out_dir).map_err(|e| io_failure(&out_dir, e))?;
    let csv_path = out_dir.join("trials.csv");
    let mut csv = std::io::BufWriter::new(fs::File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?);
    let outcome = bench::run_suite(
        &suite.scenarios,
        &suite.planners,
        suite.trials_per_pair,
        suite.parallelism,
        &suite.settings,
        Some(&mut csv),
    )?;
    csv.flush().map_err(|e| io_failure(&csv_path, e))?;

    let report = bench::render_report(&outcome.report, &outcome.rows);
    let report_path = out_dir.join("report.txt");
    fs::write(&report_path, &report).map_err(|e| io_failure(&report_path, e))?;

    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| io_failure(&plots, e))?;
    for scenario in &suite.scenarios {
        let paths = bench::first_trial_paths(&outcome.rows, &scenario.id);
        if let Ok(svg) = plot_trajectories(scenario, &paths) {
            let p = plots.join(format!("{}.svg", scenario.id));
            fs::write(&p, svg).map_err(|e| io_failure(&p, e))?;
        }
    }
    let _ = write!(stdout, "{report}");
    let _ = writeln!(
        stdout,
        "\n{} trials written to {}",
        outcome.rows.len(),
        csv_path.display()
    );
    Ok(())
}

/// File name for a generated map.
pub fn map_file_name(width: usize, height: usize, density: f64, seed: u64) -> String {
    format!("map_{width}x{height}_d{density}_s{seed}.map")
}

fn cmd_gen_maps(a: &GenMapsArgs, file: &ConfigFile, stdout: &mut dyn Write) -> Result<(), Failure> {
    if a.count == 0 {
        return Err(Failure::usage("count must be at least 1"));
    }
    let (w, h) = a.size;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let out_dir = a
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("maps"));
    // validate once before touching the file system
    random_map(w, h, a.density, seed).map_err(|e| Failure::usage(e.to_string()))?;
    fs::create_dir_all(&out_dir).map_err(|e| io_failure(&out_dir, e))?;
    for i in 0..a.count as u64 {
        let s = seed.wrapping_add(i);
        let map = random_map(w, h, a.density, s).map_err(|e| Failure::usage(e.to_string()))?;
        let path = out_dir.join(map_file_name(w, h, a.density, s));
        fs::write(&path, serialize_map(&map)).map_err(|e| io_failure(&path, e))?;
        let _ = writeln!(stdout, "{}", path.display());
    }
    Ok(())
}
