//! Scenario files: everything a run needs, in one TOML document.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use uwbloc_core::baselines::BaselineKind;
use uwbloc_core::calibration::BiasRanges;
use uwbloc_core::estimator::{LikelihoodSpec, Modality};
use uwbloc_core::geometry::{make_coprime, make_ula, AnchorArray, Direction, Environment, Position};
use uwbloc_core::measurement::{MeasurementPlan, NoiseModel, Pairing, DEFAULT_WAVELENGTH};

use crate::error::{ExpError, Result};
use crate::trajectory::TrajectorySpec;

/// Anchor placement. Linear layouts sit on the `y = 0` wall, centred, facing
/// into the room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    /// Corners and the two wall midpoints on `y = 0` and `y = height`, pulled
    /// in by `inset`.
    Diverse { inset: f64 },
    /// Three half-wavelength pairs spread over `aperture`: the outer
    /// antennas sit at the aperture ends.
    Constrained { aperture: f64 },
    Ula { count: usize, aperture: f64 },
    Coprime { count: usize, aperture: f64, pair: (usize, usize) },
    Custom { anchors: Vec<Position> },
}

impl Layout {
    pub fn build(&self, env: &Environment) -> Result<AnchorArray> {
        let lam = DEFAULT_WAVELENGTH;
        let cx = env.width / 2.0;
        let array = match self {
            Layout::Diverse { inset } => {
                let (w, h, i) = (env.width, env.height, *inset);
                let pts = vec![
                    Position::new(i, i),
                    Position::new(w - i, i),
                    Position::new(i, h - i),
                    Position::new(w - i, h - i),
                    Position::new(cx, i),
                    Position::new(cx, h - i),
                ];
                AnchorArray::new(pts, lam, Direction::PLUS_Y)?
            }
            Layout::Constrained { aperture } => {
                let half = aperture / 2.0;
                let mut pts = Vec::with_capacity(6);
                for c in [cx - half + lam / 4.0, cx, cx + half - lam / 4.0] {
                    pts.push(Position::new(c - lam / 4.0, 0.0));
                    pts.push(Position::new(c + lam / 4.0, 0.0));
                }
                AnchorArray::new(pts, lam, Direction::PLUS_Y)?
            }
            Layout::Ula { count, aperture } => make_ula(*count, *aperture, Position::new(cx, 0.0), Direction::PLUS_X)?,
            Layout::Coprime { count, aperture, pair } => {
                make_coprime(*count, *aperture, Position::new(cx, 0.0), Direction::PLUS_X, *pair)?
            }
            Layout::Custom { anchors } => AnchorArray::new(anchors.clone(), lam, Direction::PLUS_Y)?,
        };
        Ok(array)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Twr,
    Tdoa,
    Aoa,
    Fused,
    /// Global minimiser of the joint TDoA + PDoA score.
    JointGrid,
    /// Particle filter over `pf.updates` packets.
    JointPf,
}

impl EstimatorKind {
    pub fn baseline(&self) -> Option<BaselineKind> {
        match self {
            EstimatorKind::Twr => Some(BaselineKind::Twr),
            EstimatorKind::Tdoa => Some(BaselineKind::Tdoa),
            EstimatorKind::Aoa => Some(BaselineKind::Aoa),
            EstimatorKind::Fused => Some(BaselineKind::Fused),
            _ => None,
        }
    }
}

/// How the estimator treats injected phase biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Uses the true bias parameters.
    #[default]
    Known,
    /// Fits them by three-point calibration from noisy phases.
    ThreePoint,
    /// Assumes unbiased receivers.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfSettings {
    /// Packets per static trial.
    pub updates: usize,
    pub density: f64,
    /// Random-walk std per packet, meters.
    pub process_noise: f64,
}

impl Default for PfSettings {
    fn default() -> Self {
        Self { updates: 5, density: 500.0, process_noise: 0.003 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub trials: usize,
    /// Heatmap lattice spacing, meters.
    pub grid_res: f64,
    pub estimator: EstimatorKind,
    pub modality: Modality,
    pub calibration: CalibrationMode,
    /// Packets averaged at each three-point calibration position.
    pub calibration_packets: usize,
    /// Random tag positions keep this far from the walls, meters.
    pub tag_margin: f64,
    pub environment: Environment,
    pub layout: Layout,
    pub noise: NoiseModel,
    pub pf: PfSettings,
    /// Per-trial hardware biases drawn from these ranges.
    pub bias: Option<BiasRanges>,
    pub trajectory: Option<TrajectorySpec>,
}

/// Link-level noise of the comparison study: 140 ps TDoA, 5° PDoA, 150 ps
/// TWR, 1.5° AoA.
pub fn study_noise() -> NoiseModel {
    NoiseModel {
        sigma_t: 140e-12,
        sigma_theta: 5f64.to_radians(),
        sigma_twr: 150e-12,
        sigma_aoa: 1.5f64.to_radians(),
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 50,
            grid_res: 0.05,
            estimator: EstimatorKind::JointGrid,
            modality: Modality::Fused,
            calibration: CalibrationMode::Known,
            calibration_packets: 1,
            tag_margin: 0.1,
            environment: Environment::default(),
            layout: Layout::Ula { count: 6, aperture: 1.0 },
            noise: NoiseModel { sigma_t: 150e-12, ..study_noise() },
            pf: PfSettings::default(),
            bias: None,
            trajectory: None,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExpError::Config(m));
        Environment::new(self.environment.width, self.environment.height)?;
        self.noise.validate()?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.grid_res > 0.0 && self.grid_res.is_finite()) {
            return bad(format!("grid_res must be positive, got {}", self.grid_res));
        }
        let m = self.tag_margin;
        if !(m >= 0.0 && 2.0 * m < self.environment.width.min(self.environment.height)) {
            return bad(format!("tag_margin {m} leaves no room for tags"));
        }
        if self.calibration_packets == 0 || self.pf.updates == 0 {
            return bad("calibration_packets and pf.updates must be at least 1".into());
        }
        let array = self.array()?;
        let need = match self.estimator {
            EstimatorKind::Twr => 3,
            EstimatorKind::Aoa | EstimatorKind::Fused => 6,
            _ => 2,
        };
        if array.len() < need {
            return bad(format!("{:?} needs at least {need} anchors", self.estimator));
        }
        if self.estimator.baseline().is_none() {
            self.likelihood_spec().validate()?;
        }
        Ok(())
    }

    pub fn array(&self) -> Result<AnchorArray> {
        self.layout.build(&self.environment)
    }

    /// What each trial measures for the configured estimator.
    pub fn plan(&self) -> MeasurementPlan {
        let aoa_pairs = vec![(0, 1), (2, 3), (4, 5)];
        match self.estimator {
            EstimatorKind::Twr => MeasurementPlan { include_twr: true, ..Default::default() },
            EstimatorKind::Aoa => MeasurementPlan { aoa_pairs, ..Default::default() },
            // One antenna of each pair takes part in the time differences.
            EstimatorKind::Fused => MeasurementPlan {
                pairing: Pairing::Explicit(vec![(0, 2), (0, 4), (2, 4)]),
                include_twr: true,
                aoa_pairs,
                outliers: None,
            },
            _ => MeasurementPlan::default(),
        }
    }

    pub fn likelihood_spec(&self) -> LikelihoodSpec {
        LikelihoodSpec::new(self.noise.sigma_t, self.noise.sigma_theta)
            .with_modality(self.modality)
            .with_calibration(self.calibration != CalibrationMode::Ignored)
    }

    /// Uniform tag position inside the margin.
    pub fn random_tag<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        let m = self.tag_margin;
        let (w, h) = (self.environment.width - 2.0 * m, self.environment.height - 2.0 * m);
        Position::new(m + w * rng.gen::<f64>(), m + h * rng.gen::<f64>())
    }
}
