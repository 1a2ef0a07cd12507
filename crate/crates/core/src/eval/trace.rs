use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::EvalError;
use crate::world::{EpisodeStatus, Pose, Scenario, Vec2, ROBOT_RADIUS};

/// A support point in the robot frame (`x` lateral-left, `y` forward).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub x: f64,
    pub y: f64,
    /// Number of pooled channels this point supplies.
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
    pub goal: [f64; 2],
    pub support: Vec<SupportPoint>,
}

impl TraceRecord {
    pub fn total_multiplicity(&self) -> usize {
        self.support.iter().map(|s| s.multiplicity).sum()
    }
}

/// Support points recorded along one evaluation episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPointTrace {
    pub scenario: String,
    pub task_index: usize,
    /// Number of pooled channels (columns reserved per row).
    pub k: usize,
    pub records: Vec<TraceRecord>,
    /// Every visited pose `[x, y, θ]`.
    pub path: Vec<[f64; 3]>,
    pub status: Option<EpisodeStatus>,
}

impl SupportPointTrace {
    pub fn file_stem(&self) -> String {
        let safe: String =
            self.scenario.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        format!("{safe}_task{:03}", self.task_index)
    }
}

const BASE_COLUMNS: [&str; 8] = ["step", "x", "y", "theta", "v", "omega", "goal_x", "goal_y"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io(format!("{}: {e}", path.display()))
}

pub fn csv_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 0..k {
        h.extend([format!("sp{i}_x"), format!("sp{i}_y"), format!("sp{i}_m")]);
    }
    h
}

pub fn write_trace_csv(trace: &SupportPointTrace, path: &Path) -> Result<(), EvalError> {
    let width = trace.k.max(trace.records.iter().map(|r| r.support.len()).max().unwrap_or(0));
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(csv_header(width)).map_err(|e| io_err(path, e))?;
    for r in &trace.records {
        let mut row = vec![
            r.step.to_string(),
            r.pose.x.to_string(),
            r.pose.y.to_string(),
            r.pose.theta.to_string(),
            r.v.to_string(),
            r.omega.to_string(),
            r.goal[0].to_string(),
            r.goal[1].to_string(),
        ];
        for i in 0..width {
            match r.support.get(i) {
                Some(s) => row.extend([s.x.to_string(), s.y.to_string(), s.multiplicity.to_string()]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>, EvalError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| io_err(path, e))?;
        let num = |i: usize| -> Result<f64, EvalError> {
            row.get(i).unwrap_or("").parse::<f64>().map_err(|e| io_err(path, format!("column {i}: {e}")))
        };
        let step = row.get(0).unwrap_or("").parse::<usize>().map_err(|e| io_err(path, e))?;
        let mut support = Vec::new();
        let mut i = BASE_COLUMNS.len();
        while i + 2 < row.len() && !row.get(i).unwrap_or("").is_empty() {
            let m = row.get(i + 2).unwrap_or("").parse::<usize>().map_err(|e| io_err(path, e))?;
            support.push(SupportPoint { x: num(i)?, y: num(i + 1)?, multiplicity: m });
            i += 3;
        }
        out.push(TraceRecord {
            step,
            // theta is already wrapped, so construct directly to keep it bit-exact
            pose: Pose { x: num(1)?, y: num(2)?, theta: num(3)? },
            v: num(4)?,
            omega: num(5)?,
            goal: [num(6)?, num(7)?],
            support,
        });
    }
    Ok(out)
}

/// SVG overlay of the scenario, path, recorded robot poses and support points.
///
/// Support markers grow linearly with their multiplicity.
pub fn render_svg(trace: &SupportPointTrace, scenario: &Scenario) -> String {
    const PX: f64 = 60.0;
    let (w, h) = (scenario.width(), scenario.height());
    let tx = |p: Vec2| ((p.x - scenario.min.x) * PX, (scenario.max.y - p.y) * PX);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.1} {:.1}">"#,
        w * PX,
        h * PX,
        w * PX,
        h * PX
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{:.1}" height="{:.1}" fill="white" stroke="black" stroke-width="3"/>"##, w * PX, h * PX);
    for poly in &scenario.obstacles {
        let pts: Vec<String> = poly.iter().map(|&p| tx(p)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(s, r##"<polygon class="obstacle" points="{}" fill="#777"/>"##, pts.join(" "));
    }
    if !trace.path.is_empty() {
        let pts: Vec<String> =
            trace.path.iter().map(|p| tx(Vec2::new(p[0], p[1]))).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(s, r##"<polyline class="path" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, pts.join(" "));
    }
    if let Some(r) = trace.records.first() {
        let (gx, gy) = tx(Vec2::new(r.goal[0], r.goal[1]));
        let _ = writeln!(s, r##"<circle class="goal" cx="{gx:.1}" cy="{gy:.1}" r="{:.1}" fill="none" stroke="#2ca02c" stroke-width="2"/>"##, 0.3 * PX);
    }
    for r in &trace.records {
        let (rx, ry) = tx(r.pose.position());
        let _ = writeln!(
            s,
            r##"<circle class="robot" cx="{rx:.1}" cy="{ry:.1}" r="{:.1}" fill="none" stroke="#333" stroke-width="1.5"/>"##,
            ROBOT_RADIUS * PX
        );
        for sp in &r.support {
            let (px, py) = tx(r.pose.transform(Vec2::new(sp.y, sp.x)));
            let _ = writeln!(
                s,
                r##"<circle class="support" cx="{px:.1}" cy="{py:.1}" r="{:.1}" fill="#d62728" fill-opacity="0.7"/>"##,
                2.0 * sp.multiplicity as f64
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>.csv` and `<stem>.svg` for every trace into `dir`.
pub fn export_traces(traces: &[SupportPointTrace], scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    if traces.is_empty() {
        return Err(EvalError::Io("no traces to export".into()));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for t in traces {
        let csv_path = dir.join(format!("{}.csv", t.file_stem()));
        write_trace_csv(t, &csv_path)?;
        let svg_path = dir.join(format!("{}.svg", t.file_stem()));
        fs::write(&svg_path, render_svg(t, scenario)).map_err(|e| io_err(&svg_path, e))?;
        written.extend([csv_path, svg_path]);
    }
    Ok(written)
}
