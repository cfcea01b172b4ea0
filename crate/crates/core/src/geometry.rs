//! Planar geometry shared by every other module: positions, the room, anchor
//! arrays and row-major evaluation lattices.
//!
//! Convention: a wall-mounted array lies on `y = 0` facing `+y`, and the room
//! occupies `[0, width] × [0, height]`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationParams;
use crate::error::{Error, Result};
use crate::measurement::DEFAULT_WAVELENGTH;

/// A point (or displacement) in the floor plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, other: &Position) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k)
    }
}

/// Unit vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Position", into = "Position")]
pub struct Direction(Position);

impl Direction {
    pub const PLUS_X: Direction = Direction(Position::new(1.0, 0.0));
    pub const PLUS_Y: Direction = Direction(Position::new(0.0, 1.0));

    pub fn new(x: f64, y: f64) -> Result<Self> {
        let n = x.hypot(y);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("direction must be a finite non-zero vector"));
        }
        Ok(Direction(Position::new(x / n, y / n)))
    }

    pub fn from_angle(radians: f64) -> Self {
        Direction(Position::new(radians.cos(), radians.sin()))
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn as_vector(&self) -> Position {
        self.0
    }

    /// Rotated by +90° (counter-clockwise).
    pub fn perpendicular(&self) -> Direction {
        Direction(Position::new(-self.0.y, self.0.x))
    }
}

impl TryFrom<Position> for Direction {
    type Error = Error;
    fn try_from(p: Position) -> Result<Self> {
        Direction::new(p.x, p.y)
    }
}

impl From<Direction> for Position {
    fn from(d: Direction) -> Position {
        d.0
    }
}

/// Rectangular room `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub width: f64,
    pub height: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self { width: 3.0, height: 3.0 }
    }
}

impl Environment {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid(format!("environment must be positive, got {width} x {height}")));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Position {
        Position::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    /// Fold a point back inside the room by mirroring at the walls.
    pub fn reflect(&self, p: Position) -> Position {
        fn fold(v: f64, hi: f64) -> f64 {
            let period = 2.0 * hi;
            let mut r = v.rem_euclid(period);
            if r > hi {
                r = period - r;
            }
            r
        }
        Position::new(fold(p.x, self.width), fold(p.y, self.height))
    }
}

/// Ordered receiver positions plus the carrier wavelength and per-anchor
/// phase-bias parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorArray {
    anchors: Vec<Position>,
    wavelength: f64,
    calibration: Vec<CalibrationParams>,
    normal: Direction,
}

impl AnchorArray {
    /// Build an array from explicit positions; calibration defaults to identity.
    pub fn new(anchors: Vec<Position>, wavelength: f64, normal: Direction) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 anchors, got {}", anchors.len())));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        for (i, a) in anchors.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::invalid(format!("anchor {i} is not finite")));
            }
            for (j, b) in anchors.iter().enumerate().skip(i + 1) {
                if a.distance(b) < 1e-12 {
                    return Err(Error::invalid(format!("anchors {i} and {j} coincide")));
                }
            }
        }
        let calibration = vec![CalibrationParams::IDENTITY; anchors.len()];
        Ok(Self { anchors, wavelength, calibration, normal })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[Position] {
        &self.anchors
    }

    pub fn anchor(&self, i: usize) -> Result<Position> {
        self.anchors
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, len: self.anchors.len() })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn normal(&self) -> Direction {
        self.normal
    }

    pub fn calibration(&self) -> &[CalibrationParams] {
        &self.calibration
    }

    pub fn calibration_of(&self, i: usize) -> Result<CalibrationParams> {
        self.calibration
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, len: self.calibration.len() })
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        self.wavelength = wavelength;
        Ok(self)
    }

    pub fn with_calibration(mut self, calibration: Vec<CalibrationParams>) -> Result<Self> {
        if calibration.len() != self.anchors.len() {
            return Err(Error::invalid(format!(
                "{} calibration entries for {} anchors",
                calibration.len(),
                self.anchors.len()
            )));
        }
        self.calibration = calibration;
        Ok(self)
    }

    pub fn without_calibration(mut self) -> Self {
        self.calibration = vec![CalibrationParams::IDENTITY; self.anchors.len()];
        self
    }

    /// End-to-end span of the array.
    pub fn aperture(&self) -> f64 {
        let mut span: f64 = 0.0;
        for (i, a) in self.anchors.iter().enumerate() {
            for b in &self.anchors[i + 1..] {
                span = span.max(a.distance(b));
            }
        }
        span
    }

    pub fn centroid(&self) -> Position {
        let n = self.anchors.len() as f64;
        let s = self.anchors.iter().fold(Position::default(), |acc, p| acc + *p);
        s * (1.0 / n)
    }
}

/// Uniform linear array of `count` anchors spanning `aperture`, symmetric
/// about `center` along `axis`. The array faces `axis` rotated by +90°.
pub fn make_ula(count: usize, aperture: f64, center: Position, axis: Direction) -> Result<AnchorArray> {
    if count < 2 {
        return Err(Error::invalid(format!("ULA needs at least 2 anchors, got {count}")));
    }
    if !(aperture > 0.0 && aperture.is_finite()) {
        return Err(Error::invalid(format!("aperture must be positive, got {aperture}")));
    }
    let spacing = aperture / (count - 1) as f64;
    let a = axis.as_vector();
    let anchors = (0..count)
        .map(|k| center + a * (-aperture / 2.0 + k as f64 * spacing))
        .collect();
    AnchorArray::new(anchors, DEFAULT_WAVELENGTH, axis.perpendicular())
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Co-prime linear array.
///
/// For a co-prime pair `(m, n)` the prototype is the union of two uniform
/// sub-arrays on a unit lattice: `n` elements with spacing `m` and `m`
/// elements with spacing `n`, sharing the element at 0. The union has
/// `m + n - 1` distinct elements and spans `(n - 1)·m` or `(m - 1)·n` lattice
/// units; the unit is scaled so the span equals `aperture`. `count` is the
/// antenna budget: the union must fit inside it.
pub fn make_coprime(
    count: usize,
    aperture: f64,
    center: Position,
    axis: Direction,
    pair: (usize, usize),
) -> Result<AnchorArray> {
    let (m, n) = pair;
    if m == 0 || n == 0 || gcd(m, n) != 1 {
        return Err(Error::invalid(format!("pair ({m}, {n}) is not co-prime")));
    }
    if !(aperture > 0.0 && aperture.is_finite()) {
        return Err(Error::invalid(format!("aperture must be positive, got {aperture}")));
    }
    let mut lattice: Vec<usize> = (0..n).map(|k| k * m).chain((0..m).map(|k| k * n)).collect();
    lattice.sort_unstable();
    lattice.dedup();
    if lattice.len() < 2 {
        return Err(Error::invalid(format!("pair ({m}, {n}) yields a single element")));
    }
    if lattice.len() > count {
        return Err(Error::invalid(format!(
            "co-prime pair ({m}, {n}) needs {} antennas, budget is {count}",
            lattice.len()
        )));
    }
    let span = *lattice.last().expect("non-empty") as f64;
    let unit = aperture / span;
    let a = axis.as_vector();
    let anchors = lattice
        .iter()
        .map(|&k| center + a * (k as f64 * unit - aperture / 2.0))
        .collect();
    AnchorArray::new(anchors, DEFAULT_WAVELENGTH, axis.perpendicular())
}

/// Row-major lattice of evaluation points covering an environment.
///
/// The lattice has `ceil(width/res) × ceil(height/res)` points spaced exactly
/// `res` apart, centred in the room; when the resolution divides the room the
/// points are the cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGrid {
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    origin: Position,
}

fn cells(extent: f64, res: f64) -> usize {
    // Guard against 3.0 / 0.05 = 60.000000000000004.
    let ratio = extent / res;
    let n = (ratio - 1e-9 * ratio.max(1.0)).ceil();
    (n as usize).max(1)
}

pub fn eval_grid(env: &Environment, resolution: f64) -> Result<EvalGrid> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid(format!("grid resolution must be positive, got {resolution}")));
    }
    if resolution > env.width.min(env.height) {
        return Err(Error::invalid(format!(
            "grid resolution {resolution} exceeds the room's smaller side"
        )));
    }
    let nx = cells(env.width, resolution);
    let ny = cells(env.height, resolution);
    let origin = Position::new(
        (env.width - (nx - 1) as f64 * resolution) / 2.0,
        (env.height - (ny - 1) as f64 * resolution) / 2.0,
    );
    Ok(EvalGrid { resolution, nx, ny, origin })
}

impl EvalGrid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: usize) -> Position {
        let (ix, iy) = (index % self.nx, index / self.nx);
        self.point_at(ix, iy)
    }

    pub fn point_at(&self, ix: usize, iy: usize) -> Position {
        Position::new(
            self.origin.x + ix as f64 * self.resolution,
            self.origin.y + iy as f64 * self.resolution,
        )
    }

    pub fn index_of(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn points(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<Position> {
        self.points().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> Position {
        Position::new(0.0, 0.0)
    }

    #[test]
    fn ula_six_over_one_meter_is_twenty_cm() {
        let a = make_ula(6, 1.0, origin(), Direction::PLUS_X).unwrap();
        for w in a.anchors().windows(2) {
            assert!((w[0].distance(&w[1]) - 0.2).abs() < 1e-12);
        }
        assert!((a.aperture() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ula_two_and_four() {
        let a = make_ula(2, 1.0, origin(), Direction::PLUS_X).unwrap();
        assert_eq!(a.anchors(), &[Position::new(-0.5, 0.0), Position::new(0.5, 0.0)]);
        let b = make_ula(4, 1.0, origin(), Direction::PLUS_X).unwrap();
        assert!((b.anchors()[1].x - b.anchors()[0].x - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ula_rejects_bad_arguments() {
        assert!(make_ula(1, 1.0, origin(), Direction::PLUS_X).is_err());
        assert!(make_ula(3, 0.0, origin(), Direction::PLUS_X).is_err());
        assert!(make_ula(3, -1.0, origin(), Direction::PLUS_X).is_err());
    }

    #[test]
    fn ula_faces_away_from_bottom_wall() {
        let a = make_ula(6, 1.0, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap();
        assert_eq!(a.normal(), Direction::PLUS_Y);
    }

    #[test]
    fn coprime_two_three_lattice() {
        // {0, 2, 4} ∪ {0, 3} = {0, 2, 3, 4}; span 4 units -> unit 0.25 m.
        let a = make_coprime(6, 1.0, origin(), Direction::PLUS_X, (2, 3)).unwrap();
        let xs: Vec<f64> = a.anchors().iter().map(|p| p.x).collect();
        let want = [-0.5, 0.0, 0.25, 0.5];
        assert_eq!(xs.len(), want.len());
        for (x, w) in xs.iter().zip(want) {
            assert!((x - w).abs() < 1e-12, "{xs:?}");
        }
    }

    #[test]
    fn coprime_three_four_uses_six_antennas() {
        // {0, 3, 6, 9} ∪ {0, 4, 8} = {0, 3, 4, 6, 8, 9}
        let a = make_coprime(6, 0.9, origin(), Direction::PLUS_X, (3, 4)).unwrap();
        let xs: Vec<f64> = a.anchors().iter().map(|p| p.x + 0.45).collect();
        let want = [0.0, 0.3, 0.4, 0.6, 0.8, 0.9];
        for (x, w) in xs.iter().zip(want) {
            assert!((x - w).abs() < 1e-12, "{xs:?}");
        }
    }

    #[test]
    fn coprime_degenerate_and_invalid() {
        let a = make_coprime(2, 1.0, origin(), Direction::PLUS_X, (1, 2)).unwrap();
        assert_eq!(a.anchors(), &[Position::new(-0.5, 0.0), Position::new(0.5, 0.0)]);
        assert!(make_coprime(6, 1.0, origin(), Direction::PLUS_X, (2, 4)).is_err());
        assert!(make_coprime(3, 1.0, origin(), Direction::PLUS_X, (3, 4)).is_err());
    }

    #[test]
    fn grid_counts() {
        let env = Environment::default();
        assert_eq!(eval_grid(&env, 0.001).unwrap().len(), 9_000_000);
        assert_eq!(eval_grid(&env, 0.05).unwrap().len(), 3600);
        let one = eval_grid(&env, 3.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.point(0), Position::new(1.5, 1.5));
        assert!(eval_grid(&env, 0.0).is_err());
        assert!(eval_grid(&env, -0.1).is_err());
    }

    #[test]
    fn grid_is_row_major_cell_centres() {
        let g = eval_grid(&Environment::default(), 0.05).unwrap();
        assert!(g.point(0).distance(&Position::new(0.025, 0.025)) < 1e-12);
        let p1 = g.point(1);
        assert!((p1.x - 0.075).abs() < 1e-12 && (p1.y - 0.025).abs() < 1e-12);
        let p60 = g.point(60);
        assert!((p60.x - 0.025).abs() < 1e-12 && (p60.y - 0.075).abs() < 1e-12);
    }

    #[test]
    fn reflect_folds_into_room() {
        let env = Environment::default();
        assert!(env.reflect(Position::new(-0.2, 3.5)).distance(&Position::new(0.2, 2.5)) < 1e-12);
        assert_eq!(env.reflect(Position::new(1.0, 1.0)), Position::new(1.0, 1.0));
    }

    proptest! {
        #[test]
        fn ula_spacing_uniform(count in 2usize..24, aperture in 0.05f64..5.0) {
            let a = make_ula(count, aperture, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap();
            let spacing: Vec<f64> = a.anchors().windows(2).map(|w| w[0].distance(&w[1])).collect();
            let lo = spacing.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = spacing.iter().cloned().fold(0.0, f64::max);
            prop_assert!(hi - lo < 1e-12);
        }

        #[test]
        fn ula_is_rigid_motion_equivariant(
            count in 2usize..10, aperture in 0.1f64..3.0,
            cx in -5.0f64..5.0, cy in -5.0f64..5.0, angle in -3.14f64..3.14,
        ) {
            let base = make_ula(count, aperture, Position::new(0.0, 0.0), Direction::PLUS_X).unwrap();
            let moved = make_ula(count, aperture, Position::new(cx, cy), Direction::from_angle(angle)).unwrap();
            let (s, c) = angle.sin_cos();
            for (b, m) in base.anchors().iter().zip(moved.anchors()) {
                let rx = c * b.x - s * b.y + cx;
                let ry = s * b.x + c * b.y + cy;
                prop_assert!((rx - m.x).abs() < 1e-9 && (ry - m.y).abs() < 1e-9);
            }
        }

        #[test]
        fn grid_points_in_room_and_evenly_spaced(
            w in 0.5f64..4.0, h in 0.5f64..4.0, frac in 0.02f64..0.5,
        ) {
            let env = Environment::new(w, h).unwrap();
            let res = frac * w.min(h);
            let g = eval_grid(&env, res).unwrap();
            prop_assert_eq!(g.len(), ((w / res - 1e-9).ceil() as usize) * ((h / res - 1e-9).ceil() as usize));
            for p in g.points() {
                prop_assert!(env.contains(&p));
            }
            if g.nx > 1 {
                prop_assert!((g.point_at(1, 0).x - g.point_at(0, 0).x - res).abs() < 1e-12);
            }
            if g.ny > 1 {
                prop_assert!((g.point_at(0, 1).y - g.point_at(0, 0).y - res).abs() < 1e-12);
            }
        }
    }
}
