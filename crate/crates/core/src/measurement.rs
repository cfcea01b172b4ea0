//! Measurement models: what a receiver pair should observe for a tag at a
//! given position, how synthetic observations are noised, and how oscillator
//! phase noise turns into timing and phase error.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration::expected_pdoa_calibrated;
use crate::error::{Error, Result};
use crate::geometry::{AnchorArray, Direction, Position};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// UWB channel 5 centre frequency.
pub const CENTER_FREQUENCY_HZ: f64 = 3.5e9;

pub const DEFAULT_WAVELENGTH: f64 = SPEED_OF_LIGHT / CENTER_FREQUENCY_HZ;

/// Phase quantisation of the receivers (256 levels). Not applied to synthetic
/// measurements; the Gaussian phase noise already dominates it.
pub const PHASE_RESOLUTION_DEG: f64 = 1.4;

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Wrap an angle into `[-π, π)`. Values already in range are returned unchanged.
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let r = x - TAU * ((x + PI) / TAU).floor();
    // floor() rounding can land exactly on +π
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Per-measurement Gaussian standard deviations; zero means noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// TDoA std, seconds.
    pub sigma_t: f64,
    /// PDoA std, radians.
    pub sigma_theta: f64,
    /// TWR time-of-flight std, seconds.
    pub sigma_twr: f64,
    /// AoA std, radians.
    pub sigma_aoa: f64,
}

impl NoiseModel {
    pub const NOISELESS: NoiseModel =
        NoiseModel { sigma_t: 0.0, sigma_theta: 0.0, sigma_twr: 0.0, sigma_aoa: 0.0 };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_t", self.sigma_t),
            ("sigma_theta", self.sigma_theta),
            ("sigma_twr", self.sigma_twr),
            ("sigma_aoa", self.sigma_aoa),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which anchor pairs feed the difference measurements.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `(0, j)` for every other anchor `j`.
    #[default]
    Reference,
    /// Every unordered pair `(i, j)`, `i < j`.
    AllPairs,
    Explicit(Vec<(usize, usize)>),
}

impl Pairing {
    pub fn pairs(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        let pairs: Vec<(usize, usize)> = match self {
            Pairing::Reference => (1..n).map(|j| (0, j)).collect(),
            Pairing::AllPairs => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            Pairing::Explicit(p) => p.clone(),
        };
        for &(i, j) in &pairs {
            check_pair(i, j, n)?;
        }
        Ok(pairs)
    }
}

fn check_pair(i: usize, j: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    if i == j {
        return Err(Error::SelfPair(i));
    }
    Ok(())
}

/// One bearing observed by a closely spaced receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaObservation {
    pub center: Position,
    pub normal: Direction,
    /// Radians, positive toward the array axis (`normal` rotated by -90°).
    pub angle: f64,
}

/// A single packet's worth of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub pairs: Vec<(usize, usize)>,
    /// Seconds, one per pair.
    pub tdoa: Vec<f64>,
    /// Radians in `[-π, π)`, one per pair.
    pub pdoa: Vec<f64>,
    /// Time of flight per anchor, seconds.
    pub twr: Option<Vec<f64>>,
    pub aoa: Option<Vec<AoaObservation>>,
    pub noise: NoiseModel,
}

/// Additive multipath outliers: each receiver independently sees, with
/// probability `probability`, an extra path delay uniform in `[0, max_extra_m]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierModel {
    pub probability: f64,
    pub max_extra_m: f64,
}

impl Default for OutlierModel {
    fn default() -> Self {
        // 1 ns sampling: reflections within 30 cm are not separable.
        Self { probability: 0.05, max_extra_m: 0.30 }
    }
}

/// What to synthesise for one packet.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub pairing: Pairing,
    #[serde(default)]
    pub include_twr: bool,
    /// Receiver pairs that each report one bearing.
    #[serde(default)]
    pub aoa_pairs: Vec<(usize, usize)>,
    /// Off by default: only the direct path is modelled.
    #[serde(default)]
    pub outliers: Option<OutlierModel>,
}

impl MeasurementPlan {
    pub fn with_pairing(pairing: Pairing) -> Self {
        Self { pairing, ..Self::default() }
    }
}

/// `(|p - x_i| - |p - x_j|) / c`
pub fn expected_tdoa(p: &Position, array: &AnchorArray, i: usize, j: usize) -> Result<f64> {
    check_pair(i, j, array.len())?;
    let a = array.anchors();
    Ok((p.distance(&a[i]) - p.distance(&a[j])) / SPEED_OF_LIGHT)
}

/// Exact (near-field) phase difference for an ideal receiver pair, wrapped to `[-π, π)`.
pub fn expected_pdoa(p: &Position, array: &AnchorArray, i: usize, j: usize) -> Result<f64> {
    check_pair(i, j, array.len())?;
    let a = array.anchors();
    let path = p.distance(&a[i]) - p.distance(&a[j]);
    Ok(wrap_phase(TAU * path / array.wavelength()))
}

/// Far-field phase difference `2π d sin(θ) / λ`, unwrapped.
pub fn far_field_pdoa(theta: f64, d: f64, lambda: f64) -> f64 {
    TAU * d * theta.sin() / lambda
}

pub fn expected_twr(p: &Position, anchor: &Position) -> f64 {
    p.distance(anchor) / SPEED_OF_LIGHT
}

/// Signed angle between `p - pair_center` and `normal`; positive toward
/// `normal` rotated by -90° (the array axis for a wall array facing `+y`).
pub fn expected_aoa(p: &Position, pair_center: &Position, normal: &Direction) -> f64 {
    let v = *p - *pair_center;
    let n = normal.as_vector();
    let t = Position::new(n.y, -n.x);
    v.dot(&t).atan2(v.dot(&n))
}

/// Draw one packet of noisy observations for a tag at `p`.
///
/// The array's calibration parameters play the role of the true hardware
/// biases. Draw order is fixed (TDoA, PDoA, TWR, AoA, outliers) so a seed
/// reproduces the set bit for bit.
pub fn sample_measurements<R: Rng + ?Sized>(
    p: &Position,
    array: &AnchorArray,
    plan: &MeasurementPlan,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<MeasurementSet> {
    noise.validate()?;
    let pairs = plan.pairing.pairs(array.len())?;
    let mut tdoa = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let z: f64 = rng.sample(StandardNormal);
        tdoa.push(expected_tdoa(p, array, i, j)? + noise.sigma_t * z);
    }
    let mut pdoa = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let z: f64 = rng.sample(StandardNormal);
        pdoa.push(wrap_phase(expected_pdoa_calibrated(p, array, i, j)? + noise.sigma_theta * z));
    }
    let mut twr = if plan.include_twr {
        let mut v = Vec::with_capacity(array.len());
        for a in array.anchors() {
            let z: f64 = rng.sample(StandardNormal);
            v.push(expected_twr(p, a) + noise.sigma_twr * z);
        }
        Some(v)
    } else {
        None
    };
    let aoa = if plan.aoa_pairs.is_empty() {
        None
    } else {
        let normal = array.normal();
        let mut v = Vec::with_capacity(plan.aoa_pairs.len());
        for &(i, j) in &plan.aoa_pairs {
            check_pair(i, j, array.len())?;
            let center = (array.anchors()[i] + array.anchors()[j]) * 0.5;
            let z: f64 = rng.sample(StandardNormal);
            let angle = expected_aoa(p, &center, &normal) + noise.sigma_aoa * z;
            v.push(AoaObservation { center, normal, angle });
        }
        Some(v)
    };
    if let Some(out) = plan.outliers {
        let extra: Vec<f64> = (0..array.len())
            .map(|_| {
                let hit = rng.gen::<f64>() < out.probability;
                let len = rng.gen::<f64>() * out.max_extra_m;
                if hit {
                    len / SPEED_OF_LIGHT
                } else {
                    0.0
                }
            })
            .collect();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            tdoa[k] += extra[i] - extra[j];
        }
        if let Some(t) = twr.as_mut() {
            for (v, e) in t.iter_mut().zip(&extra) {
                *v += e;
            }
        }
    }
    Ok(MeasurementSet { pairs, tdoa, pdoa, twr, aoa, noise: *noise })
}

/// One row of an oscillator phase-noise plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoisePoint {
    pub offset_hz: f64,
    pub dbc_per_hz: f64,
}

/// Oscillator and receiver clocking parameters for the jitter budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    pub f_osc: f64,
    pub phase_noise: Vec<PhaseNoisePoint>,
    /// Measurement bandwidth, Hz.
    pub delta_f: f64,
    /// Sampling frequency, Hz.
    pub f_s: f64,
    /// Time-stamp clock frequency, Hz.
    pub f_t: f64,
}

impl OscillatorSpec {
    /// 38.4 MHz reference with -115 dBc/Hz at 100 Hz and -160 dBc/Hz at 100 kHz.
    pub fn crystek() -> Self {
        Self::reference_with(-115.0, -160.0)
    }

    /// 38.4 MHz reference with -109 dBc/Hz at 100 Hz and -150 dBc/Hz at 100 kHz.
    pub fn abracon() -> Self {
        Self::reference_with(-109.0, -150.0)
    }

    fn reference_with(at_100hz: f64, at_100khz: f64) -> Self {
        Self {
            f_osc: 38.4e6,
            phase_noise: vec![
                PhaseNoisePoint { offset_hz: 100.0, dbc_per_hz: at_100hz },
                PhaseNoisePoint { offset_hz: 100e3, dbc_per_hz: at_100khz },
            ],
            delta_f: 1e6,
            f_s: 1e9,
            // 499.2 MHz x 128 time-stamp counter
            f_t: 63.8976e9,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: OscillatorSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("oscillator spec serialises")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("f_osc", self.f_osc), ("delta_f", self.delta_f), ("f_s", self.f_s), ("f_t", self.f_t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.phase_noise.is_empty() {
            return Err(Error::EmptyPhaseNoiseTable);
        }
        Ok(())
    }

    /// Phase noise at `offset` in dBc/Hz, interpolated linearly in log-offset.
    pub fn phase_noise_dbc(&self, offset: f64) -> Result<f64> {
        if self.phase_noise.is_empty() {
            return Err(Error::EmptyPhaseNoiseTable);
        }
        if !(offset > 0.0) {
            return Err(Error::invalid(format!("offset must be positive, got {offset}")));
        }
        let mut table = self.phase_noise.clone();
        table.sort_by(|a, b| a.offset_hz.total_cmp(&b.offset_hz));
        if let Some(p) = table.iter().find(|p| (p.offset_hz - offset).abs() <= 1e-9 * offset) {
            return Ok(p.dbc_per_hz);
        }
        for w in table.windows(2) {
            let (a, b) = (w[0], w[1]);
            if offset > a.offset_hz && offset < b.offset_hz {
                let t = (offset.ln() - a.offset_hz.ln()) / (b.offset_hz.ln() - a.offset_hz.ln());
                return Ok(a.dbc_per_hz + t * (b.dbc_per_hz - a.dbc_per_hz));
            }
        }
        Err(Error::invalid(format!("offset {offset} Hz is outside the phase-noise table")))
    }
}

/// Clock jitter std: `sqrt(2) / (2π f_osc) · sqrt(Δf · N_φ(offset))`, with
/// `N_φ` converted from dBc/Hz to a linear power ratio.
pub fn jitter_sigma(spec: &OscillatorSpec, offset: f64) -> Result<f64> {
    let dbc = spec.phase_noise_dbc(offset)?;
    let linear = 10f64.powf(dbc / 10.0);
    Ok(std::f64::consts::SQRT_2 / (TAU * spec.f_osc) * (spec.delta_f * linear).sqrt())
}

/// Phase and time-stamp error stds induced by `jitter`:
/// `σ_φ = (c/λ)·(f_osc / (2π f_s))·σ_jitter`, `σ_t = (f_osc / f_t)·σ_jitter`.
pub fn phase_time_sigmas(spec: &OscillatorSpec, jitter: f64, lambda: f64) -> (f64, f64) {
    let sigma_phi = (SPEED_OF_LIGHT / lambda) * (spec.f_osc / (TAU * spec.f_s)) * jitter;
    let sigma_t = (spec.f_osc / spec.f_t) * jitter;
    (sigma_phi, sigma_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ula, Direction};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn pair_array() -> AnchorArray {
        AnchorArray::new(
            vec![Position::new(0.0, 0.0), Position::new(1.0, 0.0)],
            DEFAULT_WAVELENGTH,
            Direction::PLUS_Y,
        )
        .unwrap()
    }

    #[test]
    fn wrap_range_and_identity() {
        assert_eq!(wrap_phase(PI), -PI);
        assert_eq!(wrap_phase(-PI), -PI);
        assert_eq!(wrap_phase(0.5), 0.5);
        assert!((wrap_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_phase(-11.906) - (-11.906 + 4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn tdoa_examples() {
        let a = pair_array();
        assert_eq!(expected_tdoa(&Position::new(0.5, 2.0), &a, 0, 1).unwrap(), 0.0);
        // Independent distance oracle: |(0,3)-(0,0)| = 3, |(0,3)-(1,0)| = sqrt(10).
        let want = (3.0 - 10f64.sqrt()) / SPEED_OF_LIGHT;
        let got = expected_tdoa(&Position::new(0.0, 3.0), &a, 0, 1).unwrap();
        assert!((got - want).abs() < 1e-24);
        assert!((got - -5.413e-10).abs() < 1e-13);
        assert!(expected_tdoa(&Position::new(0.0, 3.0), &a, 0, 0).is_err());
        assert!(expected_tdoa(&Position::new(0.0, 3.0), &a, 0, 2).is_err());
        // Tag on an anchor is allowed.
        assert!(expected_tdoa(&Position::new(0.0, 0.0), &a, 0, 1).is_ok());
    }

    #[test]
    fn pdoa_examples() {
        let a = pair_array();
        assert_eq!(expected_pdoa(&Position::new(0.5, 1.0), &a, 0, 1).unwrap(), 0.0);
        // 2π(3 - √10)/λ ≈ -11.904 rad, which wraps to ≈ 0.66 rad.
        let raw = TAU * (3.0 - 10f64.sqrt()) / DEFAULT_WAVELENGTH;
        assert!((raw - -11.906).abs() < 5e-3);
        let oracle = raw + 4.0 * PI;
        let got = expected_pdoa(&Position::new(0.0, 3.0), &a, 0, 1).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got}");
        assert!((got - 0.660).abs() < 5e-3);
    }

    #[test]
    fn pdoa_is_wavelength_periodic() {
        // Tag on the far side of anchor 0 along the array axis: moving it one
        // wavelength further adds exactly λ to both paths' difference.
        let a = pair_array();
        let p = Position::new(-0.7, 0.0);
        let q = Position::new(-0.7 - DEFAULT_WAVELENGTH, 0.0);
        let d0 = expected_pdoa(&p, &a, 0, 1).unwrap();
        let d1 = expected_pdoa(&q, &a, 0, 1).unwrap();
        assert!(wrap_phase(d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn far_field_examples() {
        assert_eq!(far_field_pdoa(0.0, 0.5, DEFAULT_WAVELENGTH), 0.0);
        let lam = 0.08565;
        assert!((far_field_pdoa(PI / 2.0, lam / 2.0, lam) - PI).abs() < 1e-12);
        let wide = far_field_pdoa(PI / 2.0, 1.0, lam);
        assert!((wide - 73.36).abs() < 0.01, "{wide}");
        assert!((wide / TAU - 11.68).abs() < 0.01);
    }

    #[test]
    fn twr_and_aoa_examples() {
        let o = Position::new(0.0, 0.0);
        assert_eq!(expected_twr(&o, &o), 0.0);
        assert!((expected_twr(&Position::new(3.0, 0.0), &o) - 1.0007e-8).abs() < 1e-12);
        let n = Direction::PLUS_Y;
        assert_eq!(expected_aoa(&Position::new(0.0, 2.0), &o, &n), 0.0);
        assert!((expected_aoa(&Position::new(1.0, 1.0), &o, &n) - PI / 4.0).abs() < 1e-12);
        assert!((expected_aoa(&Position::new(-1.0, 1.0), &o, &n) + PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_sampling_is_exact() {
        let a = make_ula(6, 1.0, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap();
        let p = Position::new(1.2, 2.1);
        let plan = MeasurementPlan { include_twr: true, aoa_pairs: vec![(0, 1)], ..Default::default() };
        let m = sample_measurements(&p, &a, &plan, &NoiseModel::NOISELESS, &mut seeded(1)).unwrap();
        for (k, &(i, j)) in m.pairs.iter().enumerate() {
            assert_eq!(m.tdoa[k], expected_tdoa(&p, &a, i, j).unwrap());
            assert_eq!(m.pdoa[k], expected_pdoa(&p, &a, i, j).unwrap());
        }
        assert_eq!(m.twr.unwrap()[3], expected_twr(&p, &a.anchors()[3]));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = make_ula(6, 1.0, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap();
        let noise = NoiseModel { sigma_t: 150e-12, sigma_theta: 5f64.to_radians(), ..Default::default() };
        let plan = MeasurementPlan::default();
        let p = Position::new(2.0, 1.0);
        let m1 = sample_measurements(&p, &a, &plan, &noise, &mut seeded(9)).unwrap();
        let m2 = sample_measurements(&p, &a, &plan, &noise, &mut seeded(9)).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn sampled_noise_has_nominal_std_and_no_bias() {
        let a = make_ula(6, 1.0, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap();
        let sigma_t = 150e-12;
        let sigma_theta = 5f64.to_radians();
        let noise = NoiseModel { sigma_t, sigma_theta, ..Default::default() };
        let plan = MeasurementPlan::with_pairing(Pairing::Explicit(vec![(0, 5)]));
        let p = Position::new(1.5, 1.5);
        let t0 = expected_tdoa(&p, &a, 0, 5).unwrap();
        let f0 = expected_pdoa(&p, &a, 0, 5).unwrap();
        let mut rng = seeded(2024);
        let n = 10_000;
        let (mut st, mut st2, mut sf, mut sf2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let m = sample_measurements(&p, &a, &plan, &noise, &mut rng).unwrap();
            let et = m.tdoa[0] - t0;
            let ef = wrap_phase(m.pdoa[0] - f0);
            st += et;
            st2 += et * et;
            sf += ef;
            sf2 += ef * ef;
        }
        let nf = n as f64;
        let (mt, mf) = (st / nf, sf / nf);
        let sd_t = (st2 / nf - mt * mt).sqrt();
        let sd_f = (sf2 / nf - mf * mf).sqrt();
        assert!((sd_t / sigma_t - 1.0).abs() < 0.03, "{sd_t}");
        assert!((sd_f / sigma_theta - 1.0).abs() < 0.03, "{sd_f}");
        assert!(mt.abs() < 4.0 * sigma_t / nf.sqrt());
        assert!(mf.abs() < 4.0 * sigma_theta / nf.sqrt());
    }

    #[test]
    fn pairing_schemes() {
        assert_eq!(Pairing::Reference.pairs(4).unwrap(), vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(Pairing::AllPairs.pairs(6).unwrap().len(), 15);
        assert!(Pairing::Explicit(vec![(1, 1)]).pairs(3).is_err());
        assert!(Pairing::Explicit(vec![(0, 3)]).pairs(3).is_err());
    }

    #[test]
    fn crystek_jitter_matches_closed_form() {
        let spec = OscillatorSpec::crystek();
        let got = jitter_sigma(&spec, 100e3).unwrap();
        // Direct substitution: -160 dBc/Hz = 1e-16.
        let oracle = 2f64.sqrt() / (2.0 * PI * 38.4e6) * (1e6 * 1e-16f64).sqrt();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
        let (phi, t) = phase_time_sigmas(&spec, got, DEFAULT_WAVELENGTH);
        assert!(phi <= 5f64.to_radians());
        assert!(t <= 150e-12);
    }

    #[test]
    fn jitter_scaling_and_degenerate_cases() {
        let mut spec = OscillatorSpec::crystek();
        let j1 = jitter_sigma(&spec, 100e3).unwrap();
        spec.f_osc *= 2.0;
        let j2 = jitter_sigma(&spec, 100e3).unwrap();
        assert!((j1 / j2 - 2.0).abs() < 1e-12);

        spec.phase_noise = vec![PhaseNoisePoint { offset_hz: 1e3, dbc_per_hz: f64::NEG_INFINITY }];
        assert_eq!(jitter_sigma(&spec, 1e3).unwrap(), 0.0);

        spec.phase_noise.clear();
        assert_eq!(jitter_sigma(&spec, 1e3), Err(Error::EmptyPhaseNoiseTable));
    }

    #[test]
    fn phase_noise_interpolates_in_log_offset() {
        let spec = OscillatorSpec::crystek();
        // 10 kHz is 2/3 of the way from 100 Hz to 100 kHz in log10.
        let mid = spec.phase_noise_dbc(10e3).unwrap();
        assert!((mid - (-115.0 - 45.0 * 2.0 / 3.0)).abs() < 1e-9);
        assert!(spec.phase_noise_dbc(1e7).is_err());
    }

    #[test]
    fn sigma_pair_formulas() {
        let spec = OscillatorSpec::crystek();
        assert_eq!(phase_time_sigmas(&spec, 0.0, DEFAULT_WAVELENGTH), (0.0, 0.0));
        let (_, t1) = phase_time_sigmas(&spec, 1e-12, DEFAULT_WAVELENGTH);
        let mut fast = spec.clone();
        fast.f_osc *= 2.0;
        let (_, t2) = phase_time_sigmas(&fast, 1e-12, DEFAULT_WAVELENGTH);
        assert!((t2 / t1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oscillator_spec_round_trips_through_toml() {
        let spec = OscillatorSpec::abracon();
        assert_eq!(OscillatorSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let text = r#"
            f_osc = 38.4e6
            delta_f = 1e6
            f_s = 1e9
            f_t = 63.8976e9
            phase_noise = []
        "#;
        assert_eq!(OscillatorSpec::from_toml(text), Err(Error::EmptyPhaseNoiseTable));
    }

    proptest! {
        #[test]
        fn tdoa_bounded_by_baseline(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let a = pair_array();
            let t = expected_tdoa(&Position::new(x, y), &a, 0, 1).unwrap();
            prop_assert!(t.abs() <= 1.0 / SPEED_OF_LIGHT * (1.0 + 1e-12));
        }

        #[test]
        fn pdoa_and_tdoa_are_one_geometry(x in 0.0f64..3.0, y in 0.01f64..3.0) {
            let a = make_ula(6, 1.0, Position::new(1.5, 0.0), Direction::PLUS_X).unwrap();
            let p = Position::new(x, y);
            for j in 1..6 {
                let t = expected_tdoa(&p, &a, 0, j).unwrap();
                let f = expected_pdoa(&p, &a, 0, j).unwrap();
                let from_t = wrap_phase(TAU * SPEED_OF_LIGHT * t / a.wavelength());
                prop_assert!(wrap_phase(f - from_t).abs() < 1e-9);
            }
        }

        #[test]
        fn twr_monotone_in_distance(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
            let o = Position::new(0.0, 0.0);
            let (a, b) = (Position::new(d1, 0.0), Position::new(d2, 0.0));
            prop_assert_eq!(d1 <= d2, expected_twr(&a, &o) <= expected_twr(&b, &o));
        }

        #[test]
        fn aoa_antisymmetric_about_normal(x in 0.01f64..3.0, y in 0.01f64..3.0) {
            let o = Position::new(0.0, 0.0);
            let n = Direction::PLUS_Y;
            let a = expected_aoa(&Position::new(x, y), &o, &n);
            let b = expected_aoa(&Position::new(-x, y), &o, &n);
            prop_assert!((a + b).abs() < 1e-12);
        }
    }
}
