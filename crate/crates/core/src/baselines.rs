//! Least-squares comparison localizers: TWR trilateration, TDoA-only,
//! AoA-only, and the TWR + AoA + TDoA fusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnchorArray, Environment, Position};
use crate::measurement::{expected_aoa, wrap_phase, AoaObservation, MeasurementSet, NoiseModel, SPEED_OF_LIGHT};
use crate::solver::{levenberg_marquardt, solve_in_environment, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Twr,
    Tdoa,
    Aoa,
    Fused,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [BaselineKind::Twr, BaselineKind::Tdoa, BaselineKind::Aoa, BaselineKind::Fused];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Twr => "twr",
            BaselineKind::Tdoa => "tdoa",
            BaselineKind::Aoa => "aoa",
            BaselineKind::Fused => "fused",
        }
    }
}

/// A position estimate; `flagged` marks answers that no start could place
/// inside the room.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    pub position: Position,
    pub flagged: bool,
}

fn unit(p: Position, a: &Position) -> (f64, [f64; 2]) {
    let d = p.distance(a);
    let dd = d.max(1e-12);
    (d, [(p.x - a.x) / dd, (p.y - a.y) / dd])
}

/// Minimise `Σ (|p − x_i| − c·r_i)²` over the room.
pub fn trilaterate_twr(ranges: &[f64], anchors: &AnchorArray, env: &Environment) -> Result<Fix> {
    if anchors.len() < 3 {
        return Err(Error::invalid(format!("TWR needs at least 3 anchors, got {}", anchors.len())));
    }
    if ranges.len() != anchors.len() {
        return Err(Error::invalid(format!("{} ranges for {} anchors", ranges.len(), anchors.len())));
    }
    let problem = |p: Position, r: &mut Vec<f64>, j: &mut Vec<[f64; 2]>| {
        for (a, &t) in anchors.anchors().iter().zip(ranges) {
            let (d, u) = unit(p, a);
            r.push(d - SPEED_OF_LIGHT * t);
            j.push(u);
        }
    };
    let s = solve_in_environment(&problem, env, &SolverOptions::default());
    Ok(Fix { position: s.position, flagged: s.flagged })
}

/// Minimise `Σ (t_ij − (|p − x_i| − |p − x_j|)/c)²` over the room.
pub fn locate_tdoa(meas: &MeasurementSet, anchors: &AnchorArray, env: &Environment) -> Result<Fix> {
    if meas.pairs.len() < 2 || meas.tdoa.len() != meas.pairs.len() {
        return Err(Error::invalid("TDoA localisation needs at least 2 pair measurements"));
    }
    let n = anchors.len();
    for &(i, j) in &meas.pairs {
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
        }
    }
    let x = anchors.anchors();
    // Residuals in meters of path difference keep the solver well scaled.
    let problem = |p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>| {
        for (&(i, j), &t) in meas.pairs.iter().zip(&meas.tdoa) {
            let (di, ui) = unit(p, &x[i]);
            let (dj, uj) = unit(p, &x[j]);
            r.push(di - dj - SPEED_OF_LIGHT * t);
            jac.push([ui[0] - uj[0], ui[1] - uj[1]]);
        }
    };
    let s = solve_in_environment(&problem, env, &SolverOptions::default());
    Ok(Fix { position: s.position, flagged: s.flagged })
}

/// `∂/∂p` of the bearing of `p` seen from `o`.
fn aoa_gradient(p: Position, o: &AoaObservation) -> [f64; 2] {
    let n = o.normal.as_vector();
    let t = Position::new(n.y, -n.x);
    let v = p - o.center;
    let (s, q) = (v.dot(&t), v.dot(&n));
    let den = (s * s + q * q).max(1e-24);
    [(q * t.x - s * n.x) / den, (q * t.y - s * n.y) / den]
}

fn aoa_residuals(obs: &[AoaObservation], p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>) {
    for o in obs {
        let g = aoa_gradient(p, o);
        r.push(wrap_phase(o.angle - expected_aoa(&p, &o.center, &o.normal)));
        jac.push([-g[0], -g[1]]);
    }
}

/// Least-squares intersection of bearing lines, then one Gauss–Newton step
/// on the angular residuals.
pub fn locate_aoa(obs: &[AoaObservation]) -> Result<Position> {
    if obs.len() < 2 {
        return Err(Error::invalid(format!("AoA needs at least 2 bearings, got {}", obs.len())));
    }
    // Each bearing is the line through `center` along `u`; its normal `m`
    // gives the constraint m·p = m·center.
    let (mut a, mut b, mut c, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for o in obs {
        let n = o.normal.as_vector();
        let t = Position::new(n.y, -n.x);
        let u = n * o.angle.cos() + t * o.angle.sin();
        let m = Position::new(-u.y, u.x);
        let rhs = m.dot(&o.center);
        a += m.x * m.x;
        b += m.x * m.y;
        c += m.y * m.y;
        bx += m.x * rhs;
        by += m.y * rhs;
    }
    let det = a * c - b * b;
    if det.abs() <= 1e-12 * (a * c).max(1e-300) {
        return Err(Error::Degenerate("bearing lines are parallel".into()));
    }
    let p0 = Position::new((c * bx - b * by) / det, (a * by - b * bx) / det);
    let problem = |p: Position, r: &mut Vec<f64>, j: &mut Vec<[f64; 2]>| aoa_residuals(obs, p, r, j);
    let one = SolverOptions { max_iterations: 1, initial_damping: 0.0, ..SolverOptions::default() };
    Ok(levenberg_marquardt(&problem, p0, &one).position)
}

/// Variance-weighted joint fit of per-anchor TWR, per-pair AoA and TDoA.
pub fn locate_fused(meas: &MeasurementSet, anchors: &AnchorArray, env: &Environment, noise: &NoiseModel) -> Result<Fix> {
    let twr = meas.twr.as_ref().ok_or_else(|| Error::invalid("fused fit needs TWR ranges"))?;
    let aoa = meas.aoa.as_ref().ok_or_else(|| Error::invalid("fused fit needs AoA bearings"))?;
    if twr.len() != anchors.len() {
        return Err(Error::invalid(format!("{} ranges for {} anchors", twr.len(), anchors.len())));
    }
    for (name, s) in [("sigma_twr", noise.sigma_twr), ("sigma_aoa", noise.sigma_aoa), ("sigma_t", noise.sigma_t)] {
        if !(s > 0.0) {
            return Err(Error::invalid(format!("fused weights need {name} > 0")));
        }
    }
    let x = anchors.anchors();
    let (w_r, w_a, w_t) = (
        1.0 / (SPEED_OF_LIGHT * noise.sigma_twr),
        1.0 / noise.sigma_aoa,
        1.0 / (SPEED_OF_LIGHT * noise.sigma_t),
    );
    let problem = |p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>| {
        for (a, &t) in x.iter().zip(twr) {
            let (d, u) = unit(p, a);
            r.push((d - SPEED_OF_LIGHT * t) * w_r);
            jac.push([u[0] * w_r, u[1] * w_r]);
        }
        for o in aoa {
            let g = aoa_gradient(p, o);
            r.push(wrap_phase(o.angle - expected_aoa(&p, &o.center, &o.normal)) * w_a);
            jac.push([-g[0] * w_a, -g[1] * w_a]);
        }
        for (&(i, j), &t) in meas.pairs.iter().zip(&meas.tdoa) {
            let (di, ui) = unit(p, &x[i]);
            let (dj, uj) = unit(p, &x[j]);
            r.push((di - dj - SPEED_OF_LIGHT * t) * w_t);
            jac.push([(ui[0] - uj[0]) * w_t, (ui[1] - uj[1]) * w_t]);
        }
    };
    let s = solve_in_environment(&problem, env, &SolverOptions::default());
    Ok(Fix { position: s.position, flagged: s.flagged })
}
