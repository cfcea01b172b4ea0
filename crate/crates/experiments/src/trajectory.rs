//! Built-in tag paths and a CSV loader.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use uwbloc_core::geometry::{Environment, Position};

use crate::error::{ExpError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Static { at: Position },
    /// Constant speed from `from` to `to`.
    Line { from: Position, to: Position },
    /// One lap of the axis-aligned rectangle, counter-clockwise from `min`.
    Rectangle { min: Position, max: Position },
    /// One lap of `(cx + ax·sin ωt, cy + ay·sin 2ωt)`.
    FigureEight { center: Position, ax: f64, ay: f64 },
    /// CSV with a `t,x,y` header; `duration_s` and `rate_hz` are ignored.
    File { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub duration_s: f64,
    /// Packets per second.
    pub rate_hz: f64,
    /// Particle-filter random walk per packet; defaults to 3 cm when moving
    /// and 3 mm when static.
    #[serde(default)]
    pub process_noise: Option<f64>,
    pub shape: Shape,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            rate_hz: 60.0,
            process_noise: None,
            shape: Shape::FigureEight { center: Position::new(1.5, 1.6), ax: 0.8, ay: 0.5 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct Row {
    t: f64,
    x: f64,
    y: f64,
}

impl TrajectorySpec {
    pub fn process_noise(&self) -> f64 {
        self.process_noise.unwrap_or(match self.shape {
            Shape::Static { .. } => 0.003,
            _ => 0.03,
        })
    }

    /// Timestamped truth, clipped to the room.
    pub fn sample(&self, env: &Environment) -> Result<Vec<(f64, Position)>> {
        if let Shape::File { path } = &self.shape {
            return load(Path::new(path), env);
        }
        if !(self.duration_s > 0.0 && self.rate_hz > 0.0) {
            return Err(ExpError::Config("trajectory needs positive duration_s and rate_hz".into()));
        }
        let n = (self.duration_s * self.rate_hz).round() as usize;
        let period = self.duration_s;
        let points = (0..=n)
            .map(|k| {
                let t = k as f64 / self.rate_hz;
                let u = (t / period).clamp(0.0, 1.0);
                let p = match &self.shape {
                    Shape::Static { at } => *at,
                    Shape::Line { from, to } => *from + (*to - *from) * u,
                    Shape::Rectangle { min, max } => rectangle(*min, *max, u),
                    Shape::FigureEight { center, ax, ay } => {
                        let w = TAU * u;
                        Position::new(center.x + ax * w.sin(), center.y + ay * (2.0 * w).sin())
                    }
                    Shape::File { .. } => unreachable!(),
                };
                (t, env.clamp(p))
            })
            .collect();
        Ok(points)
    }
}

fn rectangle(min: Position, max: Position, u: f64) -> Position {
    let (w, h) = (max.x - min.x, max.y - min.y);
    let mut s = u * 2.0 * (w + h);
    if s <= w {
        return Position::new(min.x + s, min.y);
    }
    s -= w;
    if s <= h {
        return Position::new(max.x, min.y + s);
    }
    s -= h;
    if s <= w {
        return Position::new(max.x - s, max.y);
    }
    s -= w;
    Position::new(min.x, max.y - s.min(h))
}

fn load(path: &Path, env: &Environment) -> Result<Vec<(f64, Position)>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let r: Row = row?;
        let p = Position::new(r.x, r.y);
        if !env.contains(&p) || !r.t.is_finite() {
            return Err(ExpError::Config(format!("trajectory point ({}, {}) at t={} is outside the room", r.x, r.y, r.t)));
        }
        if out.last().is_some_and(|&(t, _)| r.t <= t) {
            return Err(ExpError::Config("trajectory times must increase".into()));
        }
        out.push((r.t, p));
    }
    if out.is_empty() {
        return Err(ExpError::Config(format!("{} holds no trajectory points", path.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_start_and_end_where_expected() {
        let env = Environment::default();
        let mk = |shape| TrajectorySpec { duration_s: 2.0, rate_hz: 10.0, process_noise: None, shape };
        let line = mk(Shape::Line { from: Position::new(0.5, 1.0), to: Position::new(2.5, 1.0) }).sample(&env).unwrap();
        assert_eq!(line.len(), 21);
        assert!((line[10].1.x - 1.5).abs() < 1e-12);
        let rect = mk(Shape::Rectangle { min: Position::new(1.0, 1.0), max: Position::new(2.0, 2.0) }).sample(&env).unwrap();
        assert!(rect[0].1.distance(&rect[20].1) < 1e-9);
        assert!(rect[10].1.distance(&Position::new(2.0, 2.0)) < 1e-9);
        let eight = mk(Shape::FigureEight { center: Position::new(1.5, 1.5), ax: 0.5, ay: 0.3 }).sample(&env).unwrap();
        assert!(eight[0].1.distance(&eight[20].1) < 1e-9);
    }

    #[test]
    fn loads_csv_and_rejects_bad_files() {
        let dir = std::env::temp_dir().join(format!("uwbloc-traj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.csv");
        std::fs::write(&good, "t,x,y\n0.0,1.0,1.0\n0.1,1.1,1.0\n").unwrap();
        let spec = TrajectorySpec { shape: Shape::File { path: good.display().to_string() }, ..Default::default() };
        assert_eq!(spec.sample(&Environment::default()).unwrap().len(), 2);
        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "t,x,y\n0.0,1.0,1.0\n0.0,1.1,1.0\n").unwrap();
        let spec = TrajectorySpec { shape: Shape::File { path: bad.display().to_string() }, ..Default::default() };
        assert!(spec.sample(&Environment::default()).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
