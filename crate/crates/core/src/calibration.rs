//! Per-anchor phase bias `α + β·d^γ` and its three-point fit.
//!
//! Sign convention: a receiver at distance `d` from the tag reports
//! `2πd/λ − (α + β·d^γ)`, so adding the bias back to a reported phase
//! recovers the ideal one. The expected phase difference used by the
//! estimator therefore subtracts each anchor's bias from its ideal phase.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnchorArray, Position};
use crate::measurement::wrap_phase;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    /// Radians.
    pub alpha: f64,
    /// Radians per meter^γ.
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl CalibrationParams {
    pub const IDENTITY: CalibrationParams = CalibrationParams { alpha: 0.0, beta: 0.0, gamma: 1.0 };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(Error::invalid("calibration parameters must be finite"));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn is_identity(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    /// `α + β·d^γ`.
    pub fn bias(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::invalid(format!("distance must be positive, got {d}")));
        }
        Ok(self.bias_unchecked(d))
    }

    /// Bias without the distance check; a zero distance is nudged to 1 µm so
    /// negative exponents stay finite.
    #[inline]
    pub(crate) fn bias_unchecked(&self, d: f64) -> f64 {
        if self.beta == 0.0 {
            self.alpha
        } else {
            self.alpha + self.beta * d.max(1e-6).powf(self.gamma)
        }
    }

    /// `d/dd (β·d^γ)`, used by gradient-based refinement.
    #[inline]
    pub(crate) fn bias_slope(&self, d: f64) -> f64 {
        if self.beta == 0.0 {
            0.0
        } else {
            let d = d.max(1e-6);
            self.beta * self.gamma * d.powf(self.gamma - 1.0)
        }
    }
}

/// Ideal phase `2πd/λ` plus the bias term, unwrapped.
pub fn biased_phase(d: f64, params: &CalibrationParams, lambda: f64) -> Result<f64> {
    Ok(TAU * d / lambda + params.bias(d)?)
}

/// Unwrapped phase a receiver with these parameters reports at distance `d`.
pub fn raw_phase(d: f64, params: &CalibrationParams, lambda: f64) -> Result<f64> {
    Ok(TAU * d / lambda - params.bias(d)?)
}

/// Bias-corrected expected phase difference, wrapped to `[-π, π)`.
/// Identical to [`crate::measurement::expected_pdoa`] when both anchors
/// carry zero bias.
pub fn expected_pdoa_calibrated(p: &Position, array: &AnchorArray, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let xi = array.anchor(i)?;
    let xj = array.anchor(j)?;
    let (ci, cj) = (array.calibration_of(i)?, array.calibration_of(j)?);
    let (di, dj) = (p.distance(&xi), p.distance(&xj));
    let mut bias = 0.0;
    if !ci.is_identity() {
        bias += ci.bias(di)?;
    }
    if !cj.is_identity() {
        bias -= cj.bias(dj)?;
    }
    Ok(wrap_phase(TAU * (di - dj) / array.wavelength() - bias))
}

/// Bounds for the γ search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { gamma_min: -2.0, gamma_max: 2.0, grid_points: 401 }
    }
}

/// Fit one anchor's `(α, β, γ)` to bias samples `y_k = α + β·d_k^γ`.
///
/// For fixed γ the problem is linear in `(α, β)`, so γ is profiled: a grid
/// scan, a golden-section refinement around the best cell, then Gauss–Newton
/// on all three parameters to polish to machine precision.
pub fn fit_bias_curve(d: &[f64], y: &[f64], opts: &FitOptions) -> Result<CalibrationParams> {
    if d.len() != y.len() {
        return Err(Error::invalid("distance and bias sample counts differ"));
    }
    if d.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 calibration points, got {}", d.len())));
    }
    for (k, &dk) in d.iter().enumerate() {
        if !(dk > 0.0 && dk.is_finite()) {
            return Err(Error::invalid(format!("calibration distance {dk} must be positive")));
        }
        if d[..k].iter().any(|&e| (e - dk).abs() <= 1e-9 * dk) {
            return Err(Error::Degenerate(format!("repeated calibration distance {dk}")));
        }
    }
    if opts.grid_points < 2 || !(opts.gamma_max > opts.gamma_min) {
        return Err(Error::invalid("bad gamma search range"));
    }

    let profile = |g: f64| -> (f64, f64, f64) {
        let (a, b) = linear_fit(d, y, g);
        let ssr = d.iter().zip(y).map(|(&dk, &yk)| (yk - a - b * dk.powf(g)).powi(2)).sum();
        (ssr, a, b)
    };

    let step = (opts.gamma_max - opts.gamma_min) / (opts.grid_points - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..opts.grid_points {
        let s = profile(opts.gamma_min + k as f64 * step).0;
        if s < best.0 {
            best = (s, k);
        }
    }
    let lo = (opts.gamma_min + (best.1 as f64 - 1.0) * step).max(opts.gamma_min);
    let hi = (opts.gamma_min + (best.1 as f64 + 1.0) * step).min(opts.gamma_max);
    let g = golden_section(|g| profile(g).0, lo, hi, 1e-10);
    let (ssr, a, b) = profile(g);
    let mut params = CalibrationParams { alpha: a, beta: b, gamma: g };
    let mut cost = ssr;

    for _ in 0..50 {
        let Some(next) = gauss_newton_step(d, y, &params) else { break };
        let next = CalibrationParams { gamma: next.gamma.clamp(opts.gamma_min, opts.gamma_max), ..next };
        let c = sse(d, y, &next);
        if !(c < cost) {
            break;
        }
        let done = (cost - c) <= 1e-30 + 1e-15 * cost;
        params = next;
        cost = c;
        if done {
            break;
        }
    }
    Ok(params)
}

fn sse(d: &[f64], y: &[f64], p: &CalibrationParams) -> f64 {
    d.iter().zip(y).map(|(&dk, &yk)| (yk - p.alpha - p.beta * dk.powf(p.gamma)).powi(2)).sum()
}

/// Least-squares `(α, β)` for fixed γ. A collinear design (γ = 0) folds
/// everything into α.
fn linear_fit(d: &[f64], y: &[f64], g: f64) -> (f64, f64) {
    let n = d.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&dk, &yk) in d.iter().zip(y) {
        let x = dk.powf(g);
        sx += x;
        sy += yk;
        sxx += x * x;
        sxy += x * yk;
    }
    let det = n * sxx - sx * sx;
    if det.abs() <= 1e-14 * (n * sxx).max(1e-300) {
        return (sy / n, 0.0);
    }
    let b = (n * sxy - sx * sy) / det;
    let a = (sy - b * sx) / n;
    (a, b)
}

fn gauss_newton_step(d: &[f64], y: &[f64], p: &CalibrationParams) -> Option<CalibrationParams> {
    // Normal equations J^T J δ = J^T r for r = y - model.
    let mut jtj = [[0.0f64; 3]; 3];
    let mut jtr = [0.0f64; 3];
    for (&dk, &yk) in d.iter().zip(y) {
        let x = dk.powf(p.gamma);
        let r = yk - p.alpha - p.beta * x;
        let j = [1.0, x, p.beta * x * dk.ln()];
        for a in 0..3 {
            jtr[a] += j[a] * r;
            for b in 0..3 {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    let delta = solve3(jtj, jtr)?;
    Some(CalibrationParams {
        alpha: p.alpha + delta[0],
        beta: p.beta + delta[1],
        gamma: p.gamma + delta[2],
    })
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while (b - a).abs() > tol {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    if fc < fe {
        c
    } else {
        e
    }
}

/// Three-point (or more) calibration.
///
/// `known` holds, for each calibration position, the unwrapped phase every
/// anchor reported there. Each anchor is fitted from its own column only.
pub fn fit_three_point(known: &[(Position, Vec<f64>)], array: &AnchorArray) -> Result<Vec<CalibrationParams>> {
    fit_three_point_with(known, array, &FitOptions::default())
}

pub fn fit_three_point_with(
    known: &[(Position, Vec<f64>)],
    array: &AnchorArray,
    opts: &FitOptions,
) -> Result<Vec<CalibrationParams>> {
    if known.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 calibration points, got {}", known.len())));
    }
    for (p, phases) in known {
        if phases.len() != array.len() {
            return Err(Error::invalid(format!(
                "calibration point at ({}, {}) has {} phases for {} anchors",
                p.x,
                p.y,
                phases.len(),
                array.len()
            )));
        }
    }
    let lambda = array.wavelength();
    (0..array.len())
        .map(|i| {
            let x = array.anchors()[i];
            let d: Vec<f64> = known.iter().map(|(p, _)| p.distance(&x)).collect();
            let y: Vec<f64> = known
                .iter()
                .zip(&d)
                .map(|((_, phases), &dk)| TAU * dk / lambda - phases[i])
                .collect();
            fit_bias_curve(&d, &y, opts)
        })
        .collect()
}

/// Uniform ranges for drawing synthetic hardware biases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRanges {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for BiasRanges {
    fn default() -> Self {
        Self { alpha: (-1.0, 1.0), beta: (0.0, 1.0), gamma: (0.5, 1.5) }
    }
}

impl BiasRanges {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<CalibrationParams> {
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
        (0..n)
            .map(|_| {
                let alpha = draw(rng, self.alpha);
                let beta = draw(rng, self.beta);
                let gamma = draw(rng, self.gamma);
                CalibrationParams { alpha, beta, gamma }
            })
            .collect()
    }
}

/// Serialisable calibration table: one entry per anchor index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationSet {
    #[serde(rename = "anchor", default)]
    pub anchors: Vec<AnchorCalibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorCalibration {
    pub index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CalibrationSet {
    pub fn from_params(params: &[CalibrationParams]) -> Self {
        let anchors = params
            .iter()
            .enumerate()
            .map(|(index, p)| AnchorCalibration { index, alpha: p.alpha, beta: p.beta, gamma: p.gamma })
            .collect();
        Self { anchors }
    }

    /// Parameters for an `n`-anchor array; anchors not listed get identity.
    pub fn to_params(&self, n: usize) -> Result<Vec<CalibrationParams>> {
        let mut out = vec![CalibrationParams::IDENTITY; n];
        for a in &self.anchors {
            let slot = out.get_mut(a.index).ok_or(Error::IndexOutOfRange { index: a.index, len: n })?;
            *slot = CalibrationParams::new(a.alpha, a.beta, a.gamma)?;
        }
        Ok(out)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration set serialises")
    }
}
