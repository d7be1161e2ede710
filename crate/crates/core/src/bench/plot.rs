//! SVG trajectory plots: map cells, start and goal markers, one labeled
//! polyline per path.

use svg::node::element::{Circle, Group, Polyline, Rectangle, Text};
use svg::Document;
use thiserror::Error;

use crate::classical::PlannedPath;
use crate::gridmap::{CellState, GridPose};
use crate::simulator::Scenario;

/// Side of one cell in SVG user units.
pub const CELL_PX: i64 = 10;
const LEGEND_ROW: i64 = 16;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlotError {
    #[error("no paths to plot")]
    EmptyPathList,
}

fn center(p: GridPose) -> (i64, i64) {
    (p.x as i64 * CELL_PX + CELL_PX / 2, p.y as i64 * CELL_PX + CELL_PX / 2)
}

/// Renders the paths over the scenario map. Waypoints are drawn verbatim
/// at cell centers; row 0 is at the top. Output bytes depend only on the
/// inputs.
pub fn plot_trajectories(scenario: &Scenario, paths: &[(String, PlannedPath)]) -> Result<String, PlotError> {
    if paths.is_empty() {
        return Err(PlotError::EmptyPathList);
    }
    let map = &scenario.map;
    let w = map.width() as i64 * CELL_PX;
    let h = map.height() as i64 * CELL_PX;
    let legend_h = LEGEND_ROW * paths.len() as i64 + 8;

    let mut cells = Group::new().set("id", "map");
    cells = cells.add(
        Rectangle::new()
            .set("x", 0)
            .set("y", 0)
            .set("width", w)
            .set("height", h)
            .set("fill", "#ffffff")
            .set("stroke", "#000000"),
    );
    for p in map.poses() {
        let fill = match map.get(p) {
            Some(CellState::Occupied) => "#404040",
            Some(CellState::Unknown) => "#b0b0b0",
            _ => continue,
        };
        cells = cells.add(
            Rectangle::new()
                .set("x", p.x as i64 * CELL_PX)
                .set("y", p.y as i64 * CELL_PX)
                .set("width", CELL_PX)
                .set("height", CELL_PX)
                .set("fill", fill),
        );
    }

    let mut doc = Document::new()
        .set("xmlns", "http://www.w3.org/2000/svg")
        .set("viewBox", (0, 0, w, h + legend_h))
        .set("width", w)
        .set("height", h + legend_h)
        .add(cells);

    for (i, (label, path)) in paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points = path
            .waypoints
            .iter()
            .map(|&p| {
                let (x, y) = center(p);
                format!("{x},{y}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        doc = doc.add(
            Polyline::new()
                .set("class", "trajectory")
                .set("data-label", label.as_str())
                .set("points", points)
                .set("fill", "none")
                .set("stroke", color)
                .set("stroke-width", 2)
                .set("stroke-linejoin", "round"),
        );
        let y = h + LEGEND_ROW * (i as i64 + 1);
        doc = doc
            .add(
                Rectangle::new()
                    .set("x", 4)
                    .set("y", y - 9)
                    .set("width", 10)
                    .set("height", 10)
                    .set("fill", color),
            )
            .add(
                Text::new(label.as_str())
                    .set("x", 20)
                    .set("y", y)
                    .set("font-size", 12)
                    .set("font-family", "monospace"),
            );
    }

    for (pose, fill, id) in [(scenario.start, "#00a000", "start"), (scenario.goal, "#e00000", "goal")] {
        let (cx, cy) = center(pose);
        doc = doc.add(
            Circle::new()
                .set("id", id)
                .set("cx", cx)
                .set("cy", cy)
                .set("r", CELL_PX / 2 + 1)
                .set("fill", fill)
                .set("stroke", "#000000"),
        );
    }
    Ok(doc.to_string())
}
