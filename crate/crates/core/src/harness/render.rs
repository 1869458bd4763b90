//! Text and SVG renderings of explanations.

use std::fmt::Write;

use crate::agent::TrajectoryPoint;
use crate::env::{GridAction, GridWorldSpec};
use crate::env::EnvAction;
use crate::error::{Error, Result};
use crate::explain::Explanation;

const CELL: f64 = 40.0;

fn action_glyph(action: &EnvAction) -> String {
    match action {
        EnvAction::Discrete(i) => GridAction::from_index(*i).map_or_else(|_| i.to_string(), |a| a.glyph().to_string()),
        EnvAction::Continuous(v) => format_action(v),
    }
}

fn format_action(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(";")
}

/// Explanation states are memory weights, which need not sit exactly on a
/// cell, so they are drawn at the nearest one.
fn nearest_cell(spec: &GridWorldSpec, raw: &[f64]) -> Option<[usize; 2]> {
    if raw.len() != 2 || raw.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let (x, y) = (raw[0].round(), raw[1].round());
    let inside = x >= 0.0 && y >= 0.0 && x < spec.width as f64 && y < spec.height as f64;
    inside.then_some([x as usize, y as usize])
}

fn entry_cells(spec: &GridWorldSpec, expl: &Explanation) -> Result<Vec<([usize; 2], String)>> {
    expl.entries
        .iter()
        .map(|e| {
            let cell = nearest_cell(spec, &e.state_raw).ok_or_else(|| {
                Error::Validation(format!("explanation entry at t={} lies outside the grid: {:?}", e.t, e.state_raw))
            })?;
            Ok((cell, action_glyph(&e.action)))
        })
        .collect()
}

fn star_points(cx: f64, cy: f64, outer: f64) -> String {
    let inner = outer * 0.45;
    (0..10)
        .map(|k| {
            let r = if k % 2 == 0 { outer } else { inner };
            let a = std::f64::consts::PI * (k as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
            format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// SVG document of the grid. Stars carry `class="star"` plus `data-x` and
/// `data-y` with the cell coordinates, and are drawn after the cell markers
/// so a star on the goal sits on top of it.
pub fn render_gridworld_svg(
    spec: &GridWorldSpec,
    expl: &Explanation,
    trajectory: Option<&[TrajectoryPoint]>,
) -> Result<String> {
    spec.validate()?;
    let stars = entry_cells(spec, expl)?;
    let (w, h) = (spec.width as f64 * CELL, spec.height as f64 * CELL);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    for y in 0..spec.height {
        for x in 0..spec.width {
            let cell = [x, y];
            let (class, fill) = if cell == spec.goal {
                ("goal", "#7fd17f")
            } else if cell == spec.start {
                ("start", "#8fb8ff")
            } else if spec.is_penalty(cell) {
                ("penalty", "#f08080")
            } else {
                ("cell", "#ffffff")
            };
            writeln!(
                s,
                r##"<rect class="{class}" data-x="{x}" data-y="{y}" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#999"/>"##,
                x as f64 * CELL,
                y as f64 * CELL
            )
            .unwrap();
        }
    }
    if let Some(points) = trajectory {
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            let [x, y] = spec.cell_of(&p.state)?;
            pts.push(format!("{:.1},{:.1}", (x as f64 + 0.5) * CELL, (y as f64 + 0.5) * CELL));
        }
        writeln!(
            s,
            r##"<polyline class="trajectory" points="{}" fill="none" stroke="#333" stroke-width="2" stroke-opacity="0.6"/>"##,
            pts.join(" ")
        )
        .unwrap();
    }
    for ([x, y], glyph) in &stars {
        let (cx, cy) = ((*x as f64 + 0.5) * CELL, (*y as f64 + 0.5) * CELL);
        writeln!(
            s,
            r##"<polygon class="star" data-x="{x}" data-y="{y}" points="{}" fill="#ffd700" stroke="#a08000"/>"##,
            star_points(cx, cy, CELL * 0.42)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text class="action" data-x="{x}" data-y="{y}" x="{cx:.1}" y="{:.1}" font-size="14" text-anchor="middle">{glyph}</text>"#,
            cy + 5.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Two characters per cell: the cell kind (`S`, `G`, `X`, `o` for a visited
/// cell, `.` otherwise) followed by the action glyph of an explanation
/// entry or a space.
pub fn render_gridworld_ascii(
    spec: &GridWorldSpec,
    expl: &Explanation,
    trajectory: Option<&[TrajectoryPoint]>,
) -> Result<String> {
    spec.validate()?;
    let mut grid = vec![vec![['.', ' ']; spec.width]; spec.height];
    if let Some(points) = trajectory {
        for p in points {
            let [x, y] = spec.cell_of(&p.state)?;
            grid[y][x][0] = 'o';
        }
    }
    for y in 0..spec.height {
        for x in 0..spec.width {
            if spec.is_penalty([x, y]) {
                grid[y][x][0] = 'X';
            }
        }
    }
    grid[spec.start[1]][spec.start[0]][0] = 'S';
    grid[spec.goal[1]][spec.goal[0]][0] = 'G';
    for ([x, y], glyph) in entry_cells(spec, expl)? {
        grid[y][x][1] = glyph.chars().next().unwrap_or('*');
    }
    let mut out = String::new();
    for row in grid {
        let line: String = row.iter().flat_map(|c| c.iter()).collect();
        out.push_str(line.trim_end());
        out.push('\n');
    }
    Ok(out)
}

/// CSV text with a trajectory section and an explanation section, each
/// introduced by a `#` line and its own header.
pub fn export_mc_plot_data(trajectory: &[TrajectoryPoint], expl: &Explanation) -> String {
    let coord = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(f64::NAN);
    let action = |a: &EnvAction| match a {
        EnvAction::Discrete(i) => i.to_string(),
        EnvAction::Continuous(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
    };
    let mut s = String::from("# trajectory\nt,position,velocity,action\n");
    for p in trajectory {
        writeln!(s, "{},{},{},{}", p.t, coord(&p.state, 0), coord(&p.state, 1), action(&p.action)).unwrap();
    }
    s.push_str("\n# explanation\nposition,velocity,action,magnitude,value,beta\n");
    for e in &expl.entries {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            coord(&e.state_raw, 0),
            coord(&e.state_raw, 1),
            action(&e.action),
            e.action.magnitude(),
            e.value,
            e.beta
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::ExplanationEntry;

    fn entry(t: usize, cell: [usize; 2], action: usize) -> ExplanationEntry {
        let raw = vec![cell[0] as f64, cell[1] as f64];
        ExplanationEntry { t, state_norm: raw.clone(), state_raw: raw, value: 0.5, action: EnvAction::Discrete(action), beta: 0.9 }
    }

    fn expl(entries: Vec<ExplanationEntry>) -> Explanation {
        Explanation { entries, threshold: 0.5, ..Default::default() }
    }

    fn spec() -> GridWorldSpec {
        GridWorldSpec::new(5, 4, [0, 0], [4, 3]).with_penalties(vec![[2, 1]])
    }

    #[test]
    fn empty_explanation_has_no_stars() {
        let svg = render_gridworld_svg(&spec(), &Explanation::default(), None).unwrap();
        assert_eq!(svg.matches(r#"class="star""#).count(), 0);
        assert_eq!(svg.matches("<rect").count(), 20);
    }

    #[test]
    fn two_entries_give_two_stars_at_their_cells() {
        let svg = render_gridworld_svg(&spec(), &expl(vec![entry(0, [1, 0], 3), entry(3, [3, 2], 1)]), None).unwrap();
        assert_eq!(svg.matches(r#"class="star""#).count(), 2);
        assert!(svg.contains(r#"class="star" data-x="1" data-y="0""#));
        assert!(svg.contains(r#"class="star" data-x="3" data-y="2""#));
    }

    #[test]
    fn star_on_goal_is_drawn_after_the_goal() {
        let svg = render_gridworld_svg(&spec(), &expl(vec![entry(0, [4, 3], 1)]), None).unwrap();
        let goal = svg.find(r#"class="goal""#).unwrap();
        let star = svg.find(r#"class="star" data-x="4" data-y="3""#).unwrap();
        assert!(star > goal);
        let ascii = render_gridworld_ascii(&spec(), &expl(vec![entry(0, [4, 3], 1)]), None).unwrap();
        assert!(ascii.lines().nth(3).unwrap().ends_with("Gv"));
    }

    #[test]
    fn entry_outside_grid_is_rejected() {
        let e = expl(vec![entry(0, [9, 0], 0)]);
        assert!(matches!(render_gridworld_svg(&spec(), &e, None), Err(Error::Validation(_))));
        assert!(matches!(render_gridworld_ascii(&spec(), &e, None), Err(Error::Validation(_))));
    }

    #[test]
    fn memory_states_snap_to_the_nearest_cell() {
        let mut e = entry(0, [2, 3], 0);
        e.state_raw = vec![2.3, 2.6];
        let svg = render_gridworld_svg(&spec(), &expl(vec![e.clone()]), None).unwrap();
        assert!(svg.contains(r#"class="star" data-x="2" data-y="3""#));
        e.state_raw = vec![4.6, 0.0];
        assert!(render_gridworld_svg(&spec(), &expl(vec![e]), None).is_err());
    }

    #[test]
    fn ascii_marks_cells_and_trajectory() {
        let traj = vec![
            TrajectoryPoint { t: 0, state: vec![0.0, 0.0], action: EnvAction::Discrete(3), reward: -0.05 },
            TrajectoryPoint { t: 1, state: vec![1.0, 0.0], action: EnvAction::Discrete(1), reward: -0.05 },
        ];
        let ascii = render_gridworld_ascii(&spec(), &expl(vec![entry(0, [1, 0], 3)]), Some(&traj)).unwrap();
        let lines: Vec<&str> = ascii.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("S o>"));
        assert_eq!(&lines[1][4..5], "X");
        let svg = render_gridworld_svg(&spec(), &Explanation::default(), Some(&traj)).unwrap();
        assert!(svg.contains(r#"class="trajectory""#));
    }

    #[test]
    fn mc_export_sections() {
        let empty = export_mc_plot_data(&[], &Explanation::default());
        assert_eq!(empty, "# trajectory\nt,position,velocity,action\n\n# explanation\nposition,velocity,action,magnitude,value,beta\n");
        let traj: Vec<TrajectoryPoint> = (0..3)
            .map(|t| TrajectoryPoint { t, state: vec![-0.5 + t as f64 * 0.01, 0.001], action: EnvAction::Continuous(vec![0.5]), reward: -0.025 })
            .collect();
        let e = Explanation {
            entries: vec![ExplanationEntry {
                t: 1,
                state_raw: vec![-0.49, 0.001],
                state_norm: vec![0.4, 0.5],
                value: 3.0,
                action: EnvAction::Continuous(vec![-0.8]),
                beta: 0.7,
            }],
            threshold: 0.5,
            ..Default::default()
        };
        let csv = export_mc_plot_data(&traj, &e);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[2], "0,-0.5,0.001,0.5");
        assert!(lines[3].starts_with("1,"));
        assert!(lines[4].starts_with("2,"));
        assert_eq!(lines[8], "-0.49,0.001,-0.8,0.8,3,0.7");
    }
}
