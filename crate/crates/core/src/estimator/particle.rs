use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::geometry::{AnchorArray, Environment, Position};
use crate::measurement::MeasurementSet;
use crate::rng::SimRng;

use super::{Likelihood, LikelihoodSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfConfig {
    /// Particles per m² at (re)initialisation.
    pub density: f64,
    pub min_count: usize,
    /// Particles per meter of spread when adapting the population.
    pub particles_per_meter: f64,
    /// Random-walk std per update, meters.
    pub process_noise: f64,
    /// Resample when ESS drops below this fraction of the population.
    pub ess_fraction: f64,
    /// Upper limit on tempering stages per update.
    pub max_stages: usize,
    /// Metropolis sweeps per tempering stage.
    pub move_sweeps: usize,
    /// Probability level of the divergence gate.
    pub gate_probability: f64,
    /// Consecutive gate violations before re-initialising.
    pub gate_window: usize,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            density: 500.0,
            min_count: 100,
            particles_per_meter: 5000.0,
            process_noise: 0.003,
            ess_fraction: 0.5,
            max_stages: 30,
            move_sweeps: 3,
            gate_probability: 0.999,
            gate_window: 5,
        }
    }
}

/// Weighted particle cloud over the room.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    particles: Vec<Position>,
    weights: Vec<f64>,
    env: Environment,
    config: PfConfig,
    initial_count: usize,
    rng: SimRng,
    estimate: Position,
    spread: f64,
    gate_streak: usize,
    reinitializations: usize,
    last_stages: usize,
}

/// Uniform cloud at `density` particles/m² with the default configuration.
pub fn pf_init(env: &Environment, density: f64, rng: SimRng) -> Result<ParticleFilter> {
    ParticleFilter::new(*env, PfConfig { density, ..PfConfig::default() }, rng)
}

/// Functional form of [`ParticleFilter::update`].
pub fn pf_update(
    mut pf: ParticleFilter,
    meas: &MeasurementSet,
    array: &AnchorArray,
    spec: &LikelihoodSpec,
) -> Result<(ParticleFilter, Position)> {
    let p = pf.update(meas, array, spec)?;
    Ok((pf, p))
}

/// Functional form of [`ParticleFilter::adapt`].
pub fn pf_adapt(mut pf: ParticleFilter) -> ParticleFilter {
    pf.adapt();
    pf
}

impl ParticleFilter {
    pub fn new(env: Environment, config: PfConfig, rng: SimRng) -> Result<Self> {
        if !(config.density > 0.0 && config.density.is_finite()) {
            return Err(Error::invalid(format!("particle density must be positive, got {}", config.density)));
        }
        if !(config.process_noise >= 0.0) || !(config.particles_per_meter > 0.0) {
            return Err(Error::invalid("process noise and particles-per-meter must be non-negative"));
        }
        let initial_count = ((config.density * env.area()).round() as usize).max(1);
        let mut pf = Self {
            particles: Vec::new(),
            weights: Vec::new(),
            env,
            initial_count,
            config,
            rng,
            estimate: env.center(),
            spread: 0.0,
            gate_streak: 0,
            reinitializations: 0,
            last_stages: 0,
        };
        pf.scatter();
        Ok(pf)
    }

    fn scatter(&mut self) {
        let n = self.initial_count;
        let (w, h) = (self.env.width, self.env.height);
        self.particles.clear();
        for _ in 0..n {
            let x = self.rng.gen::<f64>() * w;
            let y = self.rng.gen::<f64>() * h;
            self.particles.push(Position::new(x, y));
        }
        self.weights = vec![1.0 / n as f64; n];
        self.summarise();
    }

    pub fn particles(&self) -> &[Position] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn initial_count(&self) -> usize {
        self.initial_count
    }

    pub fn config(&self) -> &PfConfig {
        &self.config
    }

    pub fn set_process_noise(&mut self, meters: f64) {
        self.config.process_noise = meters.max(0.0);
    }

    /// Weighted-mean position.
    pub fn estimate(&self) -> Position {
        self.estimate
    }

    /// `sqrt(trace(weighted covariance))`, meters. Large while the cloud is multi-modal.
    pub fn confidence(&self) -> f64 {
        self.spread
    }

    pub fn reinitializations(&self) -> usize {
        self.reinitializations
    }

    /// Tempering stages used by the last update.
    pub fn last_stages(&self) -> usize {
        self.last_stages
    }

    /// Fold one packet into the cloud and return the new estimate.
    ///
    /// The packet likelihood is introduced in tempered stages
    /// `L^τ1, L^τ2, …` with `Σ τ = 1`, each `τ` chosen by bisection so the
    /// effective sample size stays at the resampling threshold. Between stages
    /// the cloud is resampled and moved by Metropolis steps targeting the
    /// partially tempered likelihood; a converged cloud takes a single stage.
    pub fn update(&mut self, meas: &MeasurementSet, array: &AnchorArray, spec: &LikelihoodSpec) -> Result<Position> {
        let lik = Likelihood::new(meas, array, spec)?;
        self.predict();

        let mut nll: Vec<f64> = self.particles.iter().map(|p| finite_or_inf(lik.eval(p))).collect();
        let mut logw: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let n = self.particles.len();
        let target = self.config.ess_fraction * n as f64;
        let mut remaining = 1.0;
        let mut applied = 0.0;
        let mut stages = 0;
        loop {
            stages += 1;
            if stages >= self.config.max_stages || ess_after(&logw, &nll, remaining) >= target {
                add_scaled(&mut logw, &nll, remaining);
                break;
            }
            let (mut lo, mut hi) = (0.0, remaining);
            for _ in 0..12 {
                let mid = 0.5 * (lo + hi);
                if ess_after(&logw, &nll, mid) >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = if lo > 0.0 { lo } else { hi };
            add_scaled(&mut logw, &nll, tau);
            remaining -= tau;
            applied += tau;
            let Some(w) = normalise(&logw) else { break };
            let idx = systematic_indices(&w, n, self.rng.gen::<f64>());
            self.particles = idx.iter().map(|&k| self.particles[k]).collect();
            nll = idx.iter().map(|&k| nll[k]).collect();
            logw = vec![-(n as f64).ln(); n];
            self.metropolis(&lik, &mut nll, applied);
        }
        self.last_stages = stages;

        match normalise(&logw) {
            Some(w) => self.weights = w,
            None => {
                log::warn!("all particle weights vanished; re-initialising uniformly");
                self.reinitializations += 1;
                self.gate_streak = 0;
                self.scatter();
                return Ok(self.estimate);
            }
        }
        if effective_sample_size(&self.weights) < target {
            self.resample_to(n);
        }

        let best = nll.iter().cloned().fold(f64::INFINITY, f64::min);
        let gate = ChiSquared::new(lik.dim() as f64)
            .map(|c| c.inverse_cdf(self.config.gate_probability))
            .unwrap_or(f64::INFINITY);
        if best > gate {
            self.gate_streak += 1;
        } else {
            self.gate_streak = 0;
        }
        if self.gate_streak >= self.config.gate_window {
            log::debug!("divergence gate tripped {} times in a row; re-initialising", self.gate_streak);
            self.reinitializations += 1;
            self.gate_streak = 0;
            self.scatter();
            return Ok(self.estimate);
        }

        self.adapt();
        Ok(self.estimate)
    }

    fn predict(&mut self) {
        let q = self.config.process_noise;
        if q == 0.0 {
            return;
        }
        for p in self.particles.iter_mut() {
            let zx: f64 = self.rng.sample(StandardNormal);
            let zy: f64 = self.rng.sample(StandardNormal);
            *p = self.env.reflect(Position::new(p.x + q * zx, p.y + q * zy));
        }
    }

    /// Random-walk Metropolis at three scales targeting `L^beta`.
    fn metropolis(&mut self, lik: &Likelihood, nll: &mut [f64], beta: f64) {
        let (sx, sy) = axis_std(&self.particles);
        let shrink = (self.particles.len() as f64).powf(-1.0 / 6.0);
        let floor = 1e-4;
        let base = ((sx * shrink).max(floor), (sy * shrink).max(floor));
        for sweep in 0..self.config.move_sweeps {
            let f = 0.25f64.powi(sweep as i32);
            let (hx, hy) = (base.0 * f, base.1 * f);
            for k in 0..self.particles.len() {
                let zx: f64 = self.rng.sample(StandardNormal);
                let zy: f64 = self.rng.sample(StandardNormal);
                let u: f64 = self.rng.gen();
                let p = self.particles[k];
                let cand = self.env.reflect(Position::new(p.x + hx * zx, p.y + hy * zy));
                let c = finite_or_inf(lik.eval(&cand));
                if c.is_finite() && u.ln() < -0.5 * beta * (c - nll[k]) {
                    self.particles[k] = cand;
                    nll[k] = c;
                }
            }
        }
    }

    /// Resize the population toward `particles_per_meter · spread`, clamped
    /// to `[min_count, initial_count]`.
    pub fn adapt(&mut self) {
        self.summarise();
        let lo = self.config.min_count.min(self.initial_count);
        let want = (self.config.particles_per_meter * self.spread).round();
        let target = if want.is_finite() { (want as usize).clamp(lo, self.initial_count) } else { self.initial_count };
        if target != self.particles.len() {
            self.resample_to(target);
            self.summarise();
        }
    }

    fn resample_to(&mut self, m: usize) {
        let u = self.rng.gen::<f64>();
        let idx = systematic_indices(&self.weights, m, u);
        self.particles = idx.iter().map(|&k| self.particles[k]).collect();
        self.weights = vec![1.0 / m as f64; m];
    }

    fn summarise(&mut self) {
        let (mut mx, mut my) = (0.0, 0.0);
        for (p, w) in self.particles.iter().zip(&self.weights) {
            mx += w * p.x;
            my += w * p.y;
        }
        let mut var = 0.0;
        for (p, w) in self.particles.iter().zip(&self.weights) {
            var += w * ((p.x - mx).powi(2) + (p.y - my).powi(2));
        }
        self.estimate = Position::new(mx, my);
        self.spread = var.max(0.0).sqrt();
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn add_scaled(logw: &mut [f64], nll: &[f64], tau: f64) {
    for (l, s) in logw.iter_mut().zip(nll) {
        *l -= 0.5 * tau * s;
    }
}

/// Normalised weights via log-sum-exp, summed in index order; `None` when
/// every weight is zero or non-finite.
fn normalise(logw: &[f64]) -> Option<Vec<f64>> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return None;
    }
    for v in w.iter_mut() {
        *v /= s;
    }
    Some(w)
}

fn ess_after(logw: &[f64], nll: &[f64], tau: f64) -> f64 {
    let m = logw
        .iter()
        .zip(nll)
        .map(|(l, s)| l - 0.5 * tau * s)
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return 0.0;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for (l, s) in logw.iter().zip(nll) {
        let w = (l - 0.5 * tau * s - m).exp();
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

pub(crate) fn effective_sample_size(w: &[f64]) -> f64 {
    let s2: f64 = w.iter().map(|v| v * v).sum();
    if s2 > 0.0 {
        1.0 / s2
    } else {
        0.0
    }
}

/// Systematic resampling: `m` indices from a single uniform offset.
pub(crate) fn systematic_indices(w: &[f64], m: usize, u: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(m);
    let step = 1.0 / m as f64;
    let mut target = u * step;
    let mut cum = 0.0;
    let mut k = 0;
    let last = w.len() - 1;
    for _ in 0..m {
        while k < last && cum + w[k] < target {
            cum += w[k];
            k += 1;
        }
        out.push(k);
        target += step;
    }
    out
}

fn axis_std(ps: &[Position]) -> (f64, f64) {
    let n = ps.len() as f64;
    let (mx, my) = ps.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (mx / n, my / n);
    let (vx, vy) = ps.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.x - mx).powi(2), b + (p.y - my).powi(2)));
    ((vx / n).sqrt(), (vy / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ula, Direction};
    use crate::measurement::{sample_measurements, MeasurementPlan, NoiseModel};
    use crate::rng::{seeded, stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn ula() -> AnchorArray {
        make_ula(6, 1.0, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap()
    }

    fn spec() -> LikelihoodSpec {
        LikelihoodSpec::new(150e-12, 5f64.to_radians())
    }

    #[test]
    fn init_counts_and_weights() {
        let pf = pf_init(&Environment::default(), 500.0, seeded(1)).unwrap();
        assert_eq!(pf.len(), 4500);
        assert!(pf.weights().iter().all(|&w| w == 1.0 / 4500.0));
        let one = pf_init(&Environment::new(1.0, 1.0).unwrap(), 1.0, seeded(1)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.weights(), &[1.0]);
        let again = pf_init(&Environment::default(), 500.0, seeded(1)).unwrap();
        assert_eq!(pf.particles(), again.particles());
        assert!(pf_init(&Environment::default(), 0.0, seeded(1)).is_err());
    }

    #[test]
    fn adapt_floor_and_ceiling() {
        let env = Environment::default();
        let mut pf = pf_init(&env, 500.0, seeded(2)).unwrap();
        pf.adapt();
        assert_eq!(pf.len(), 4500);
        // Squeeze everything into a 1 cm blob.
        let mut rng = seeded(3);
        pf.particles = (0..4500)
            .map(|_| Position::new(1.5 + 0.007 * rng.gen::<f64>(), 1.5 + 0.007 * rng.gen::<f64>()))
            .collect();
        let pf = pf_adapt(pf);
        assert_eq!(pf.len(), 100);
    }

    #[test]
    fn noiseless_converges_and_stays() {
        let a = ula();
        let truth = Position::new(1.3, 1.8);
        let m = sample_measurements(&truth, &a, &MeasurementPlan::default(), &NoiseModel::NOISELESS, &mut seeded(0))
            .unwrap();
        let mut pf = pf_init(&Environment::default(), 500.0, seeded(4)).unwrap();
        for _ in 0..10 {
            let est = pf.update(&m, &a, &spec()).unwrap();
            assert!((pf.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let _ = est;
        }
        for _ in 0..10 {
            let est = pf.update(&m, &a, &spec()).unwrap();
            assert!(est.distance(&truth) < 0.01, "{est:?}");
        }
    }

    #[test]
    fn update_is_deterministic() {
        let a = ula();
        let noise = NoiseModel { sigma_t: 150e-12, sigma_theta: 5f64.to_radians(), ..Default::default() };
        let truth = Position::new(2.0, 1.2);
        let run = || {
            let mut pf = pf_init(&Environment::default(), 500.0, stream(9, 0, 0)).unwrap();
            let mut rng = stream(9, 1, 0);
            (0..5)
                .map(|_| {
                    let m = sample_measurements(&truth, &a, &MeasurementPlan::default(), &noise, &mut rng).unwrap();
                    pf.update(&m, &a, &spec()).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn systematic_resampling_respects_weights() {
        let idx = systematic_indices(&[0.0, 0.5, 0.0, 0.5], 4, 0.3);
        assert_eq!(idx, vec![1, 1, 3, 3]);
        let idx = systematic_indices(&[1.0], 3, 0.9);
        assert_eq!(idx, vec![0, 0, 0]);
    }

    proptest! {
        #[test]
        fn adapt_count_monotone_in_spread(s1 in 0.001f64..1.0, s2 in 0.001f64..1.0) {
            let count = |s: f64| {
                let mut pf = pf_init(&Environment::default(), 500.0, seeded(5)).unwrap();
                // Two equal-weight points at ±s/2·√2 per axis have spread s.
                let off = s / 2.0;
                let n = pf.particles.len();
                pf.particles = (0..n)
                    .map(|k| if k % 2 == 0 { Position::new(1.5 - off, 1.5) } else { Position::new(1.5 + off, 1.5) })
                    .collect();
                pf.adapt();
                pf.len()
            };
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(count(lo) <= count(hi));
        }
    }
}
