//! One Monte-Carlo trial: draw biases and noise, localize, score.

use rand::Rng;
use rand_distr::StandardNormal;

use uwbloc_core::baselines::{locate_aoa, locate_fused, locate_tdoa, trilaterate_twr};
use uwbloc_core::calibration::{fit_three_point, raw_phase, CalibrationParams};
use uwbloc_core::estimator::{locate_refined, Likelihood, LikelihoodSpec, ParticleFilter, PfConfig, RefineOptions};
use uwbloc_core::geometry::{AnchorArray, Environment, Position};
use uwbloc_core::measurement::{sample_measurements, MeasurementPlan, MeasurementSet};
use uwbloc_core::rng::{seeded, SimRng};
use uwbloc_core::Error;

use crate::error::Result;
use crate::scenario::{CalibrationMode, EstimatorKind, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub estimate: Position,
    pub error: f64,
    /// The estimator could not produce an in-room answer; `estimate` is its
    /// best guess or the room centre.
    pub flagged: bool,
}

/// Scenario with its array, plan and likelihood resolved once.
#[derive(Debug, Clone)]
pub struct Runner {
    pub scenario: Scenario,
    pub array: AnchorArray,
    pub plan: MeasurementPlan,
    pub spec: LikelihoodSpec,
    pub refine: RefineOptions,
}

impl Runner {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            array: scenario.array()?,
            plan: scenario.plan(),
            spec: scenario.likelihood_spec(),
            refine: RefineOptions::default(),
            scenario: scenario.clone(),
        })
    }

    fn env(&self) -> Environment {
        self.scenario.environment
    }

    /// Arrays the world measures with and the estimator assumes. Draws the
    /// biases (and calibration noise) from `rng` when the scenario has any.
    pub fn arrays<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(AnchorArray, AnchorArray)> {
        let Some(ranges) = self.scenario.bias else {
            return Ok((self.array.clone(), self.array.clone()));
        };
        let truth = self.array.clone().with_calibration(ranges.sample(self.array.len(), rng))?;
        let assumed = match self.scenario.calibration {
            CalibrationMode::Known => truth.clone(),
            CalibrationMode::Ignored => self.array.clone().without_calibration(),
            CalibrationMode::ThreePoint => {
                let fitted = three_point_calibration(&truth, &self.env(), self.scenario.noise.sigma_theta, self.scenario.calibration_packets, rng)?;
                self.array.clone().with_calibration(fitted)?
            }
        };
        Ok((truth, assumed))
    }

    pub fn measure<R: Rng + ?Sized>(&self, truth: &Position, world: &AnchorArray, rng: &mut R) -> Result<MeasurementSet> {
        Ok(sample_measurements(truth, world, &self.plan, &self.scenario.noise, rng)?)
    }

    /// Localize a static tag at `truth`.
    pub fn run<R: Rng + ?Sized>(&self, truth: Position, rng: &mut R) -> Result<Outcome> {
        let (world, assumed) = self.arrays(rng)?;
        let env = self.env();
        let (estimate, flagged) = match self.scenario.estimator {
            EstimatorKind::JointPf => {
                let mut pf = self.particle_filter(rng.gen())?;
                let mut est = env.center();
                for _ in 0..self.scenario.pf.updates {
                    let m = self.measure(&truth, &world, rng)?;
                    est = pf.update(&m, &assumed, &self.spec)?;
                }
                (est, false)
            }
            kind => {
                let m = self.measure(&truth, &world, rng)?;
                self.locate_once(kind, &m, &assumed)?
            }
        };
        Ok(Outcome { estimate, error: estimate.distance(&truth), flagged })
    }

    fn locate_once(&self, kind: EstimatorKind, m: &MeasurementSet, assumed: &AnchorArray) -> Result<(Position, bool)> {
        let env = self.env();
        let fix = match kind {
            EstimatorKind::Twr => trilaterate_twr(m.twr.as_deref().unwrap_or_default(), assumed, &env)?,
            EstimatorKind::Tdoa => locate_tdoa(m, assumed, &env)?,
            EstimatorKind::Fused => locate_fused(m, assumed, &env, &self.scenario.noise)?,
            EstimatorKind::Aoa => {
                return match locate_aoa(m.aoa.as_deref().unwrap_or_default()) {
                    // Bearings that cross outside the room count as a failure
                    // and are pulled back to the nearest wall.
                    Ok(p) => Ok((env.clamp(p), !env.contains(&p))),
                    Err(Error::Degenerate(_)) => Ok((env.center(), true)),
                    Err(e) => Err(e.into()),
                };
            }
            EstimatorKind::JointGrid => {
                let lik = Likelihood::new(m, assumed, &self.spec)?;
                return Ok((locate_refined(&lik, &env, &self.refine), false));
            }
            EstimatorKind::JointPf => unreachable!("handled by the caller"),
        };
        // Solvers that found nothing inside the room may wander far off; the
        // tag is known to be in the room, so report the nearest point of it.
        Ok((env.clamp(fix.position), fix.flagged))
    }

    pub fn particle_filter(&self, seed: u64) -> Result<ParticleFilter> {
        let s = &self.scenario.pf;
        let cfg = PfConfig { density: s.density, process_noise: s.process_noise, ..PfConfig::default() };
        Ok(ParticleFilter::new(self.env(), cfg, seeded(seed))?)
    }
}

/// Known positions used for three-point calibration: straight out from the
/// array centre at 0.5, 1.5 and 2.5 m, kept inside the room.
pub fn calibration_points(array: &AnchorArray, env: &Environment) -> Vec<Position> {
    let c = array.centroid();
    let n = array.normal().as_vector();
    [0.5, 1.5, 2.5].iter().map(|&d| env.clamp(c + n * d)).collect()
}

/// Fit every anchor's bias curve from noisy phases at the calibration
/// points. Each receiver's phase carries `sigma_pdoa/√2` of noise, so a
/// difference of two has `sigma_pdoa`; `packets` readings are averaged.
pub fn three_point_calibration<R: Rng + ?Sized>(
    truth: &AnchorArray,
    env: &Environment,
    sigma_pdoa: f64,
    packets: usize,
    rng: &mut R,
) -> Result<Vec<CalibrationParams>> {
    let sigma = sigma_pdoa / std::f64::consts::SQRT_2;
    let lambda = truth.wavelength();
    let mut known = Vec::new();
    for p in calibration_points(truth, env) {
        let mut phases = Vec::with_capacity(truth.len());
        for (a, params) in truth.anchors().iter().zip(truth.calibration()) {
            let clean = raw_phase(p.distance(a), params, lambda)?;
            let noise: f64 = (0..packets).map(|_| rng.sample::<f64, _>(StandardNormal)).sum::<f64>() / packets as f64;
            phases.push(clean + sigma * noise);
        }
        known.push((p, phases));
    }
    Ok(fit_three_point(&known, truth)?)
}

/// Stream for `(point, trial)` under the scenario seed.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> SimRng {
    uwbloc_core::rng::stream(seed, point, trial)
}
