//! Text bridge between planning state and a chat model.
//!
//! Prompts render the map as ASCII with `R` marking the robot and `G` the
//! goal. Replies follow a rigid line grammar (`grammar_v1`):
//!
//! ```text
//! scores: <up> <right> <left> <down>
//! path: (x1,y1) (x2,y2) ...
//! ```
//!
//! Only the last matching line of a reply is considered.

use std::fmt::Write as _;

use thiserror::Error;

use crate::gridmap::{GridPose, OccupancyGrid};
use crate::grounded::Instruction;

pub const GRAMMAR_VERSION: &str = "grammar_v1";

pub const SYSTEM_TEXT: &str = "You are a path planner for a mobile robot on a 2-D occupancy grid (grammar_v1). \
Map legend: '.' free, '#' occupied, '?' unknown, 'R' robot, 'G' goal. \
Coordinates are (x,y) with x the column and y the row, origin at the top-left, y growing downward. \
Answer only in the requested reply format.";

const STEP_QUESTION: &str = "Rate how useful each move is as the next step toward G.\n\
Reply with exactly one line of four non-negative numbers in the order up, right, left, down:\n\
scores: <up> <right> <left> <down>";

const FULLPATH_QUESTION: &str =
    "Plan a path from R to G that moves one cell up, right, left or down per step and never enters '#' or '?'.\n\
Reply with exactly one line listing every cell from R to G:\n\
path: (x1,y1) (x2,y2) ...";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepPrompt {
    pub system_text: String,
    pub user_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateReply {
    pub waypoints: Vec<GridPose>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranslateError {
    #[error("robot and goal markers overlap at {0}")]
    OverlappingMarkers(GridPose),
    #[error("marker at {0} lies outside the map")]
    MarkerOutOfBounds(GridPose),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MalformedReply {
    #[error("no `{0}` line in reply")]
    MissingLine(&'static str),
    #[error("expected 4 scores, found {0}")]
    Arity(usize),
    #[error("score {0:?} is not a decimal number")]
    NotANumber(String),
    #[error("score {0:?} is negative")]
    Negative(String),
    #[error("score {0:?} is not finite")]
    NonFinite(String),
    #[error("`path:` line has no coordinates")]
    EmptyPath,
    #[error("unexpected text in path at {0:?}")]
    BadCoordinate(String),
}

fn render_map(grid: &OccupancyGrid, robot: GridPose, goal: GridPose) -> Result<String, TranslateError> {
    for marker in [robot, goal] {
        if !grid.in_bounds(marker) {
            return Err(TranslateError::MarkerOutOfBounds(marker));
        }
    }
    if robot == goal {
        return Err(TranslateError::OverlappingMarkers(robot));
    }
    let mut out = String::with_capacity((grid.width() + 1) * (grid.height() + 1) + 16);
    let _ = writeln!(out, "map {}x{}", grid.width(), grid.height());
    for pose in grid.poses() {
        let ch = if pose == robot {
            'R'
        } else if pose == goal {
            'G'
        } else {
            grid.get(pose).map(|c| c.to_char()).unwrap_or('?')
        };
        out.push(ch);
        if pose.x as usize == grid.width() - 1 {
            out.push('\n');
        }
    }
    Ok(out)
}

/// Newlines in the instruction would break the fixed line layout.
fn one_line(text: &str) -> String {
    text.split(['\n', '\r'])
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn serialize_step_prompt(
    grid: &OccupancyGrid,
    state: GridPose,
    instruction: &Instruction,
    candidates: &[GridPose; 4],
) -> Result<StepPrompt, TranslateError> {
    let mut user = render_map(grid, state, instruction.goal)?;
    let _ = writeln!(user, "instruction: {}", one_line(&instruction.text));
    let _ = writeln!(user, "robot R at {state}, goal G at {}", instruction.goal);
    let _ = writeln!(
        user,
        "moves: up -> {}, right -> {}, left -> {}, down -> {}",
        candidates[0], candidates[1], candidates[2], candidates[3]
    );
    user.push_str(STEP_QUESTION);
    Ok(StepPrompt {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: user,
    })
}

pub fn serialize_fullpath_prompt(
    grid: &OccupancyGrid,
    start: GridPose,
    instruction: &Instruction,
) -> Result<StepPrompt, TranslateError> {
    let mut user = render_map(grid, start, instruction.goal)?;
    let _ = writeln!(user, "instruction: {}", one_line(&instruction.text));
    let _ = writeln!(user, "robot R at {start}, goal G at {}", instruction.goal);
    user.push_str(FULLPATH_QUESTION);
    Ok(StepPrompt {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: user,
    })
}

fn last_line_with_prefix<'a>(reply: &'a str, prefix: &'static str) -> Option<&'a str> {
    reply
        .lines()
        .rev()
        .find_map(|line| line.trim_start().strip_prefix(prefix))
}

fn is_decimal(token: &str) -> bool {
    let mut chars = token.chars().peekable();
    if matches!(chars.peek(), Some('-') | Some('+')) {
        chars.next();
    }
    let mut mantissa_digits = 0;
    let mut seen_dot = false;
    while let Some(&c) = chars.peek() {
        match c {
            '0'..='9' => mantissa_digits += 1,
            '.' if !seen_dot => seen_dot = true,
            _ => break,
        }
        chars.next();
    }
    if mantissa_digits == 0 {
        return false;
    }
    if matches!(chars.peek(), Some('e') | Some('E')) {
        chars.next();
        if matches!(chars.peek(), Some('-') | Some('+')) {
            chars.next();
        }
        let mut exp_digits = 0;
        while chars.peek().is_some_and(|c| c.is_ascii_digit()) {
            chars.next();
            exp_digits += 1;
        }
        if exp_digits == 0 {
            return false;
        }
    }
    chars.next().is_none()
}

/// Parses the last `scores:` line into the four raw move scores in the
/// order up, right, left, down.
pub fn parse_action_scores(reply: &str) -> Result<[f64; 4], MalformedReply> {
    let rest = last_line_with_prefix(reply, "scores:").ok_or(MalformedReply::MissingLine("scores:"))?;
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(MalformedReply::Arity(tokens.len()));
    }
    let mut out = [0.0; 4];
    for (slot, token) in out.iter_mut().zip(&tokens) {
        if !is_decimal(token) {
            return Err(MalformedReply::NotANumber(token.to_string()));
        }
        let value: f64 = token
            .parse()
            .map_err(|_| MalformedReply::NotANumber(token.to_string()))?;
        if !value.is_finite() {
            return Err(MalformedReply::NonFinite(token.to_string()));
        }
        if value < 0.0 || token.starts_with('-') && value != 0.0 {
            return Err(MalformedReply::Negative(token.to_string()));
        }
        *slot = if value == 0.0 { 0.0 } else { value };
    }
    Ok(out)
}

/// Renders one score with six significant digits, the precision the reply
/// grammar round-trips exactly.
pub fn format_score(value: f64) -> String {
    let s = format!("{value:.5e}");
    // normalize through parse so the text is the shortest exact form
    let parsed: f64 = s.parse().unwrap_or(value);
    format!("{parsed}")
}

pub fn render_action_scores(scores: &[f64; 4]) -> String {
    let parts: Vec<String> = scores.iter().map(|&v| format_score(v)).collect();
    format!("scores: {}", parts.join(" "))
}

pub fn render_coordinate_list(waypoints: &[GridPose]) -> String {
    let parts: Vec<String> = waypoints.iter().map(ToString::to_string).collect();
    format!("path: {}", parts.join(" "))
}

fn parse_int(s: &str) -> Option<i32> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Parses the last `path:` line into an ordered coordinate list. No
/// geometric validation happens here.
pub fn parse_coordinate_list(reply: &str) -> Result<CoordinateReply, MalformedReply> {
    let rest = last_line_with_prefix(reply, "path:").ok_or(MalformedReply::MissingLine("path:"))?;
    let mut waypoints = Vec::new();
    let mut remaining = rest.trim_start();
    while !remaining.is_empty() {
        let bad = || MalformedReply::BadCoordinate(remaining.chars().take(16).collect());
        let inner_start = remaining.strip_prefix('(').ok_or_else(bad)?;
        let close = inner_start.find(')').ok_or_else(bad)?;
        let inner = &inner_start[..close];
        let (xs, ys) = inner.split_once(',').ok_or_else(bad)?;
        let x = parse_int(xs.trim()).ok_or_else(bad)?;
        let y = parse_int(ys.trim()).ok_or_else(bad)?;
        waypoints.push(GridPose::new(x, y));
        let after = &inner_start[close + 1..];
        if !after.is_empty() && !after.starts_with(char::is_whitespace) {
            return Err(MalformedReply::BadCoordinate(after.chars().take(16).collect()));
        }
        remaining = after.trim_start();
    }
    if waypoints.is_empty() {
        return Err(MalformedReply::EmptyPath);
    }
    Ok(CoordinateReply { waypoints })
}
