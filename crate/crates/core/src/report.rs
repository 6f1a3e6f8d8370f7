//! Sweep tables, path traces and SVG path plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::MazeSpec;
use crate::trainer::{DeltaSummary, EpisodeTrace};

pub const TRACES_SCHEMA_VERSION: u32 = 1;

const SWEEP_HEADER: &str =
    "env,checkpoint,seed,delta,distance_m,steps,exec_risk,exec_risk_std,goal_rate,min_clearance_m,time_s";

/// Per-bound evaluation results of one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub env: String,
    /// Config hash stored in the checkpoint.
    pub checkpoint: String,
    pub seed: u64,
    pub rows: Vec<DeltaSummary>,
}

impl SweepReport {
    /// The `time_s` column is left empty unless timing was recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let time = r.time_s.map(|t| t.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.env,
                self.checkpoint,
                self.seed,
                r.delta,
                r.mean_distance,
                r.mean_steps,
                r.mean_exec_risk,
                r.std_exec_risk,
                r.goal_rate,
                r.mean_min_clearance,
                time
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "env {}  checkpoint {}  seed {}  (CPU only)\n",
            self.env,
            &self.checkpoint[..self.checkpoint.len().min(12)],
            self.seed
        );
        writeln!(
            out,
            "{:>6} {:>10} {:>7} {:>10} {:>6} {:>10} {:>10}",
            "delta", "dist[m]", "steps", "risk", "goal", "clear[m]", "time[s]"
        )
        .expect("writing to a string");
        for r in &self.rows {
            let time = r.time_s.map(|t| format!("{t:.2e}")).unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "{:>6.3} {:>10.3} {:>7.1} {:>10.4} {:>6.2} {:>10.3} {:>10}",
                r.delta, r.mean_distance, r.mean_steps, r.mean_exec_risk, r.goal_rate, r.mean_min_clearance, time
            )
            .expect("writing to a string");
        }
        out
    }
}

/// The `traces.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracesFile {
    pub schema_version: u32,
    pub env: String,
    /// Position uncertainty used for the recorded immediate risks.
    pub sigma: f64,
    pub traces: Vec<EpisodeTrace>,
}

impl TracesFile {
    pub fn new(maze: &MazeSpec, traces: Vec<EpisodeTrace>) -> Self {
        Self {
            schema_version: TRACES_SCHEMA_VERSION,
            env: maze.name.clone(),
            sigma: maze.noise_sigma,
            traces,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces serialize")
    }
}

/// Maze geometry with one polyline per risk bound (the first episode of
/// each), colored from blue (small bound) to red (large bound).
pub fn paths_svg(maze: &MazeSpec, traces: &[EpisodeTrace]) -> String {
    const SCALE: f64 = 40.0;
    const MARGIN: f64 = 20.0;
    let b = &maze.bounds;
    let w = b.width() * SCALE + 2.0 * MARGIN;
    let h = b.height() * SCALE + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - b.x[0]) * SCALE;
    let py = |y: f64| MARGIN + (b.y[1] - y) * SCALE;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n"
    );
    writeln!(
        svg,
        "  <path d=\"M{:.2} {:.2} H{:.2} V{:.2} H{:.2} Z\" fill=\"white\" stroke=\"black\" stroke-width=\"2\"/>",
        px(b.x[0]),
        py(b.y[0]),
        px(b.x[1]),
        py(b.y[1]),
        px(b.x[0])
    )
    .expect("writing to a string");
    for o in &maze.obstacles {
        writeln!(
            svg,
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#555\"/>",
            px(o.x[0]),
            py(o.y[1]),
            o.width() * SCALE,
            o.height() * SCALE
        )
        .expect("writing to a string");
    }
    writeln!(
        svg,
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"green\" stroke-width=\"2\"/>",
        px(maze.goal[0]),
        py(maze.goal[1]),
        maze.goal_radius * SCALE
    )
    .expect("writing to a string");

    let mut deltas: Vec<f64> = Vec::new();
    for t in traces {
        if !deltas.contains(&t.delta) {
            deltas.push(t.delta);
        }
    }
    let (lo, hi) = deltas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &d| (l.min(d), h.max(d)));
    for &d in &deltas {
        let Some(t) = traces.iter().find(|t| t.delta == d) else { continue };
        let frac = if hi > lo { (d - lo) / (hi - lo) } else { 0.5 };
        let color = format!(
            "rgb({},{},{})",
            (40.0 + 200.0 * frac).round(),
            60,
            (240.0 - 200.0 * frac).round()
        );
        let points: Vec<String> = t
            .states
            .iter()
            .map(|s| format!("{:.2},{:.2}", px(s[0]), py(s[1])))
            .collect();
        writeln!(
            svg,
            "  <polyline data-delta=\"{d}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"><title>delta {d}</title></polyline>",
            points.join(" ")
        )
        .expect("writing to a string");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(delta: f64, episode: usize) -> EpisodeTrace {
        EpisodeTrace {
            delta,
            episode,
            states: vec![vec![1.0, 5.0], vec![2.0, 6.0], vec![3.0, 7.5]],
            actions: vec![vec![0.5, 0.5], vec![0.5, 0.7]],
            rewards: vec![-1.0, -1.0],
            r_b: vec![0.0, 0.01, 0.02],
            exec_risk: 0.0298,
            mc_exec_risk: 0.03,
            steps: 2,
            distance: 3.2,
            reached_goal: false,
            min_clearance: 1.0,
            time_s: None,
        }
    }

    #[test]
    fn svg_has_one_polyline_per_delta_and_one_rect_per_obstacle() {
        let maze = MazeSpec::two_rooms();
        let traces = vec![trace(0.1, 0), trace(0.1, 1), trace(0.2, 0), trace(0.3, 0)];
        let svg = paths_svg(&maze, &traces);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches("<rect").count(), maze.obstacles.len());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn csv_has_one_row_per_delta_and_blank_time() {
        let rows = [0.1, 0.2, 0.3]
            .iter()
            .map(|&d| DeltaSummary {
                delta: d,
                episodes: 1,
                goal_rate: 1.0,
                mean_steps: 9.0,
                mean_distance: 8.5,
                mean_exec_risk: d / 2.0,
                std_exec_risk: 0.0,
                mean_min_clearance: 0.7,
                time_s: None,
            })
            .collect();
        let r = SweepReport {
            env: "one_obstacle".into(),
            checkpoint: "abc".into(),
            seed: 1,
            rows,
        };
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "one_obstacle,abc,1,0.1,8.5,9,0.05,0,1,0.7,");
        assert!(r.to_table().contains("0.100"));
    }

    #[test]
    fn traces_round_trip() {
        let f = TracesFile::new(&MazeSpec::one_obstacle(), vec![trace(0.2, 0)]);
        let back: TracesFile = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.schema_version, TRACES_SCHEMA_VERSION);
    }
}
