use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::world::geometry::{point_in_polygon, polygon_area, polygon_edges, Segment, Vec2};
use crate::world::{WorldError, ROBOT_RADIUS};

/// A fixed evaluation task: start pose `[x, y, θ]` and goal `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub start: [f64; 3],
    pub goal: [f64; 2],
}

/// On-disk scenario description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub bounds: [f64; 4],
    #[serde(default)]
    pub obstacles: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn_region: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub eval_tasks: Vec<EvalTask>,
}

/// Polygonal world with a rectangular boundary wall.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub min: Vec2,
    pub max: Vec2,
    pub obstacles: Vec<Vec<Vec2>>,
    pub spawn_region: Option<Vec<Vec2>>,
    pub eval_tasks: Vec<EvalTask>,
    segments: Vec<Segment>,
}

fn to_points(raw: &[[f64; 2]]) -> Vec<Vec2> {
    raw.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        bounds: [f64; 4],
        obstacles: Vec<Vec<Vec2>>,
    ) -> Result<Self, WorldError> {
        Self::from_file(ScenarioFile {
            name: name.into(),
            bounds,
            obstacles: obstacles.iter().map(|p| p.iter().map(|v| [v.x, v.y]).collect()).collect(),
            spawn_region: None,
            eval_tasks: Vec::new(),
        })
    }

    /// Empty rectangular room.
    pub fn empty_room(name: impl Into<String>, width: f64, height: f64) -> Self {
        Self::new(name, [0.0, 0.0, width, height], Vec::new()).expect("valid room")
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, WorldError> {
        let [xmin, ymin, xmax, ymax] = file.bounds;
        if !(xmax > xmin && ymax > ymin) || file.bounds.iter().any(|v| !v.is_finite()) {
            return Err(WorldError::InvalidScenario(format!("{}: degenerate bounds {:?}", file.name, file.bounds)));
        }
        let obstacles: Vec<Vec<Vec2>> = file.obstacles.iter().map(|p| to_points(p)).collect();
        for (i, poly) in obstacles.iter().enumerate() {
            if poly.len() < 3 || polygon_area(poly).abs() < 1e-12 {
                return Err(WorldError::InvalidScenario(format!(
                    "{}: obstacle {i} needs at least 3 vertices and nonzero area",
                    file.name
                )));
            }
        }
        let spawn_region = file.spawn_region.as_deref().map(to_points);
        if let Some(region) = &spawn_region {
            if region.len() < 3 || polygon_area(region).abs() < 1e-12 {
                return Err(WorldError::InvalidScenario(format!("{}: degenerate spawn region", file.name)));
            }
        }
        let min = Vec2::new(xmin, ymin);
        let max = Vec2::new(xmax, ymax);
        let corners = [min, Vec2::new(xmax, ymin), max, Vec2::new(xmin, ymax)];
        let mut segments: Vec<Segment> = polygon_edges(&corners).collect();
        for poly in &obstacles {
            segments.extend(polygon_edges(poly));
        }
        let scenario = Self {
            name: file.name,
            min,
            max,
            obstacles,
            spawn_region,
            eval_tasks: file.eval_tasks,
            segments,
        };
        for (i, task) in scenario.eval_tasks.iter().enumerate() {
            for p in [Vec2::new(task.start[0], task.start[1]), Vec2::new(task.goal[0], task.goal[1])] {
                if scenario.clearance(p) < ROBOT_RADIUS {
                    return Err(WorldError::InvalidScenario(format!(
                        "{}: eval task {i} point ({:.3}, {:.3}) is not in free space",
                        scenario.name, p.x, p.y
                    )));
                }
            }
        }
        Ok(scenario)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            bounds: [self.min.x, self.min.y, self.max.x, self.max.y],
            obstacles: self.obstacles.iter().map(|p| p.iter().map(|v| [v.x, v.y]).collect()).collect(),
            spawn_region: self.spawn_region.as_ref().map(|p| p.iter().map(|v| [v.x, v.y]).collect()),
            eval_tasks: self.eval_tasks.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            WorldError::Parse(m) => WorldError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// Every wall and obstacle edge.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn in_bounds(&self, p: Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    /// True when `p` lies outside the bounds or inside an obstacle.
    pub fn is_occupied(&self, p: Vec2) -> bool {
        !self.in_bounds(p) || self.obstacles.iter().any(|poly| point_in_polygon(p, poly))
    }

    /// Distance from `p` to the nearest wall or obstacle edge, or 0 when `p` is occupied.
    pub fn clearance(&self, p: Vec2) -> f64 {
        if self.is_occupied(p) {
            return 0.0;
        }
        self.segments.iter().map(|s| s.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    /// Whether a disc of `radius` centered at `p` touches anything.
    pub fn check_collision(&self, p: Vec2, radius: f64) -> bool {
        self.clearance(p) < radius
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed() -> Scenario {
        let sq = vec![Vec2::new(3.0, 3.0), Vec2::new(5.0, 3.0), Vec2::new(5.0, 5.0), Vec2::new(3.0, 5.0)];
        Scenario::new("box", [0.0, 0.0, 8.0, 8.0], vec![sq]).unwrap()
    }

    #[test]
    fn empty_world_interior_is_free() {
        let s = Scenario::empty_room("room", 8.0, 8.0);
        assert!(!s.check_collision(Vec2::new(4.0, 4.0), 0.2));
        assert!(!s.check_collision(Vec2::new(0.5, 7.5), 0.2));
    }

    #[test]
    fn wall_boundary_is_strict() {
        let s = Scenario::empty_room("room", 8.0, 8.0);
        let r = 0.2;
        assert!(s.check_collision(Vec2::new(r - 1e-6, 4.0), r));
        assert!(!s.check_collision(Vec2::new(r + 1e-6, 4.0), r));
    }

    #[test]
    fn obstacle_interior_collides() {
        let s = boxed();
        assert!(s.check_collision(Vec2::new(4.0, 4.0), 0.2));
        assert!(s.check_collision(Vec2::new(2.9, 4.0), 0.2));
        assert!(!s.check_collision(Vec2::new(2.7, 4.0), 0.2));
        assert!((s.clearance(Vec2::new(2.0, 2.0)) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_polygons_and_bad_tasks() {
        let line = vec![Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0), Vec2::new(3.0, 3.0)];
        assert!(Scenario::new("bad", [0.0, 0.0, 8.0, 8.0], vec![line]).is_err());
        let two = vec![Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)];
        assert!(Scenario::new("bad", [0.0, 0.0, 8.0, 8.0], vec![two]).is_err());
        let mut file = boxed().to_file();
        file.eval_tasks.push(EvalTask { start: [4.0, 4.0, 0.0], goal: [1.0, 1.0] });
        assert!(Scenario::from_file(file).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut file = boxed().to_file();
        file.eval_tasks.push(EvalTask { start: [1.0, 1.0, 0.5], goal: [7.0, 7.0] });
        let s = Scenario::from_file(file.clone()).unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back.to_file(), file);
    }
}
