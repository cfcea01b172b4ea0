//! Joint TDoA + PDoA scoring and the locators built on it.
//!
//! [`neg_log_likelihood`] is the reference scoring function. [`Likelihood`]
//! is the same score with the measurement set and array bound once, which is
//! what the grid search, the refined locator and the particle filter call in
//! their inner loops.

mod grid;
mod particle;

pub use grid::{grid_search_locate, likelihood_surface, locate_refined, RefineOptions};
pub use particle::{pf_adapt, pf_init, pf_update, ParticleFilter, PfConfig};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationParams;
use crate::error::{Error, Result};
use crate::geometry::{AnchorArray, Position};
use crate::measurement::{wrap_phase, MeasurementSet, Pairing, SPEED_OF_LIGHT};

const TAU: f64 = std::f64::consts::TAU;

/// Largest array the inner loops handle without allocating.
pub const MAX_ANCHORS: usize = 64;

/// Which residual families enter the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Fused,
    TdoaOnly,
    PdoaOnly,
}

/// Diagonal covariance and pairing for the joint score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSpec {
    /// Seconds.
    pub sigma_t: f64,
    /// Radians.
    pub sigma_theta: f64,
    #[serde(default)]
    pub pairing: Pairing,
    /// Subtract the array's per-anchor phase biases from expected PDoA.
    #[serde(default = "yes")]
    pub use_calibration: bool,
    #[serde(default)]
    pub modality: Modality,
}

fn yes() -> bool {
    true
}

impl LikelihoodSpec {
    pub fn new(sigma_t: f64, sigma_theta: f64) -> Self {
        Self { sigma_t, sigma_theta, pairing: Pairing::Reference, use_calibration: true, modality: Modality::Fused }
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn with_pairing(mut self, pairing: Pairing) -> Self {
        self.pairing = pairing;
        self
    }

    pub fn with_calibration(mut self, on: bool) -> Self {
        self.use_calibration = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let uses_t = self.modality != Modality::PdoaOnly;
        let uses_theta = self.modality != Modality::TdoaOnly;
        if uses_t && !(self.sigma_t > 0.0 && self.sigma_t.is_finite()) {
            return Err(Error::invalid(format!("sigma_t must be positive, got {}", self.sigma_t)));
        }
        if uses_theta && !(self.sigma_theta > 0.0 && self.sigma_theta.is_finite()) {
            return Err(Error::invalid(format!("sigma_theta must be positive, got {}", self.sigma_theta)));
        }
        Ok(())
    }
}

/// Score of one candidate position:
/// `Σ (t − t̂)²/σ_t² + Σ wrap(θ − θ̂)²/σ_θ²`. Zero at the truth for noiseless input.
pub fn neg_log_likelihood(p: &Position, meas: &MeasurementSet, array: &AnchorArray, spec: &LikelihoodSpec) -> Result<f64> {
    Ok(Likelihood::new(meas, array, spec)?.eval(p))
}

/// A measurement set bound to an array and a spec.
#[derive(Debug, Clone)]
pub struct Likelihood {
    anchors: Vec<Position>,
    calibration: Option<Vec<CalibrationParams>>,
    pairs: Vec<(usize, usize)>,
    tdoa: Vec<f64>,
    pdoa: Vec<f64>,
    w_t: f64,
    w_theta: f64,
    k_phase: f64,
    lambda: f64,
    dim: usize,
    sigma_t: f64,
    sigma_theta: f64,
}

impl Likelihood {
    pub fn new(meas: &MeasurementSet, array: &AnchorArray, spec: &LikelihoodSpec) -> Result<Self> {
        spec.validate()?;
        if array.len() > MAX_ANCHORS {
            return Err(Error::invalid(format!("at most {MAX_ANCHORS} anchors supported, got {}", array.len())));
        }
        let pairs = spec.pairing.pairs(array.len())?;
        if pairs != meas.pairs {
            return Err(Error::MismatchedPairs(format!(
                "measurement has pairs {:?}, spec expects {:?}",
                meas.pairs, pairs
            )));
        }
        if meas.tdoa.len() != pairs.len() || meas.pdoa.len() != pairs.len() {
            return Err(Error::MismatchedPairs("value count differs from pair count".into()));
        }
        let calibration = if spec.use_calibration && array.calibration().iter().any(|c| !c.is_identity()) {
            Some(array.calibration().to_vec())
        } else {
            None
        };
        let (w_t, w_theta, per_pair) = match spec.modality {
            Modality::Fused => (1.0 / (spec.sigma_t * spec.sigma_t), 1.0 / (spec.sigma_theta * spec.sigma_theta), 2),
            Modality::TdoaOnly => (1.0 / (spec.sigma_t * spec.sigma_t), 0.0, 1),
            Modality::PdoaOnly => (0.0, 1.0 / (spec.sigma_theta * spec.sigma_theta), 1),
        };
        Ok(Self {
            anchors: array.anchors().to_vec(),
            calibration,
            dim: per_pair * pairs.len(),
            pairs,
            tdoa: meas.tdoa.clone(),
            pdoa: meas.pdoa.clone(),
            w_t,
            w_theta,
            k_phase: TAU / array.wavelength(),
            lambda: array.wavelength(),
            sigma_t: spec.sigma_t,
            sigma_theta: spec.sigma_theta,
        })
    }

    /// Number of scalar residuals (the χ² degrees of freedom).
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn distances(&self, p: &Position, d: &mut [f64; MAX_ANCHORS]) {
        for (k, a) in self.anchors.iter().enumerate() {
            d[k] = p.distance(a);
        }
    }

    #[inline]
    fn bias(&self, k: usize, d: f64) -> f64 {
        match &self.calibration {
            Some(c) if !c[k].is_identity() => c[k].bias_unchecked(d),
            _ => 0.0,
        }
    }

    #[inline]
    fn expected(&self, d: &[f64; MAX_ANCHORS], i: usize, j: usize) -> (f64, f64) {
        let path = d[i] - d[j];
        let t = path / SPEED_OF_LIGHT;
        let theta = match &self.calibration {
            None => wrap_phase(TAU * path / self.lambda),
            Some(_) => wrap_phase(TAU * path / self.lambda - (self.bias(i, d[i]) - self.bias(j, d[j]))),
        };
        (t, theta)
    }

    pub fn eval(&self, p: &Position) -> f64 {
        let mut d = [0.0; MAX_ANCHORS];
        self.distances(p, &mut d);
        let mut s = 0.0;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let (t, theta) = self.expected(&d, i, j);
            if self.w_t > 0.0 {
                let e = self.tdoa[k] - t;
                s += e * e * self.w_t;
            }
            if self.w_theta > 0.0 {
                let e = wrap_phase(self.pdoa[k] - theta);
                s += e * e * self.w_theta;
            }
        }
        s
    }

    /// Whitened residuals and their Jacobian, for least-squares refinement.
    pub fn residuals(&self, p: Position, r: &mut Vec<f64>, jac: &mut Vec<[f64; 2]>) {
        let mut d = [0.0; MAX_ANCHORS];
        self.distances(&p, &mut d);
        let unit = |k: usize| -> [f64; 2] {
            let dk = d[k].max(1e-12);
            [(p.x - self.anchors[k].x) / dk, (p.y - self.anchors[k].y) / dk]
        };
        let (st, sth) = (self.w_t.sqrt(), self.w_theta.sqrt());
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let (t, theta) = self.expected(&d, i, j);
            let (ui, uj) = (unit(i), unit(j));
            let g = [ui[0] - uj[0], ui[1] - uj[1]];
            if self.w_t > 0.0 {
                r.push((self.tdoa[k] - t) * st);
                jac.push([-g[0] / SPEED_OF_LIGHT * st, -g[1] / SPEED_OF_LIGHT * st]);
            }
            if self.w_theta > 0.0 {
                let (si, sj) = match &self.calibration {
                    Some(c) => (c[i].bias_slope(d[i]), c[j].bias_slope(d[j])),
                    None => (0.0, 0.0),
                };
                let gp = [
                    self.k_phase * g[0] - (si * ui[0] - sj * uj[0]),
                    self.k_phase * g[1] - (si * ui[1] - sj * uj[1]),
                ];
                r.push(wrap_phase(self.pdoa[k] - theta) * sth);
                jac.push([-gp[0] * sth, -gp[1] * sth]);
            }
        }
    }

    /// Score at the centre of an axis-aligned cell plus a lower bound on the
    /// score anywhere inside it.
    ///
    /// The path difference `Δd = |p − x_i| − |p − x_j|` can move across the
    /// cell by at most the smaller of two bounds: a first-order term from
    /// its gradient at the centre plus a curvature remainder (the Hessian of
    /// `|p − x|` has norm `1/|p − x|`), and the global Lipschitz bound
    /// `min(2, 2‖x_i − x_j‖ / (δ_i + δ_j))` with `δ` the distance from each
    /// anchor to the cell.
    pub(crate) fn cell_bounds(&self, c: Position, hx: f64, hy: f64) -> CellBounds {
        let r = hx.hypot(hy);
        let mut d = [0.0; MAX_ANCHORS];
        let mut dmin = [0.0; MAX_ANCHORS];
        let mut bias_var = [0.0; MAX_ANCHORS];
        self.distances(&c, &mut d);
        for (k, a) in self.anchors.iter().enumerate() {
            let ex = ((a.x - c.x).abs() - hx).max(0.0);
            let ey = ((a.y - c.y).abs() - hy).max(0.0);
            dmin[k] = ex.hypot(ey);
            if let Some(cal) = &self.calibration {
                if !cal[k].is_identity() {
                    let b0 = cal[k].bias_unchecked(d[k]);
                    let lo = cal[k].bias_unchecked((d[k] - r).max(1e-6));
                    let hi = cal[k].bias_unchecked(d[k] + r);
                    bias_var[k] = (lo - b0).abs().max((hi - b0).abs());
                }
            }
        }
        let unit = |k: usize| -> [f64; 2] {
            let dk = d[k].max(1e-12);
            [(c.x - self.anchors[k].x) / dk, (c.y - self.anchors[k].y) / dk]
        };
        let (mut ub, mut lb, mut worst) = (0.0, 0.0, 0.0f64);
        let (mut along_x, mut along_y) = (0.0, 0.0);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let (t, theta) = self.expected(&d, i, j);
            let base = self.anchors[i].distance(&self.anchors[j]);
            let denom = dmin[i] + dmin[j];
            let lip = if denom > 0.0 { (2.0 * base / denom).min(2.0) } else { 2.0 };
            let (ui, uj) = (unit(i), unit(j));
            // Per-axis share of the path-difference swing, used to pick the
            // split axis.
            let (mut gx, mut gy) = (hx, hy);
            let dpath = if dmin[i] > 0.0 && dmin[j] > 0.0 {
                let kappa = 0.5 * (1.0 / dmin[i] + 1.0 / dmin[j]);
                let taylor = ((ui[0] - uj[0]).abs() + kappa * hx) * hx + ((ui[1] - uj[1]).abs() + kappa * hy) * hy;
                if taylor < lip * r {
                    gx = ((ui[0] - uj[0]).abs() + kappa * hx) * hx;
                    gy = ((ui[1] - uj[1]).abs() + kappa * hy) * hy;
                }
                taylor.min(lip * r)
            } else {
                lip * r
            };
            let mut weight = 0.0;
            if self.w_t > 0.0 {
                let e = (self.tdoa[k] - t).abs();
                ub += e * e * self.w_t;
                let dt = dpath / SPEED_OF_LIGHT;
                let m = (e - dt).max(0.0);
                lb += m * m * self.w_t;
                worst = worst.max(dt / self.sigma_t);
                weight += 1.0 / (SPEED_OF_LIGHT * self.sigma_t);
            }
            if self.w_theta > 0.0 {
                let e = wrap_phase(self.pdoa[k] - theta).abs();
                ub += e * e * self.w_theta;
                let dphi = self.k_phase * dpath + bias_var[i] + bias_var[j];
                let m = (e - dphi).max(0.0);
                lb += m * m * self.w_theta;
                worst = worst.max(dphi / self.sigma_theta);
                weight += self.k_phase / self.sigma_theta;
            }
            along_x += weight * gx;
            along_y += weight * gy;
        }
        CellBounds { center_score: ub, lower_bound: lb, spread_in_sigmas: worst, split_x: along_x >= along_y }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CellBounds {
    pub center_score: f64,
    pub lower_bound: f64,
    pub spread_in_sigmas: f64,
    /// Halving the cell along x shrinks the bound more than along y.
    pub split_x: bool,
}
