use serde::{Deserialize, Serialize};

use crate::error::{MacError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacMode {
    Tdma,
    Unslotted,
}

/// Force `tag` onto base slot `slot` at `at_s`, behind the gateway's back,
/// as a failed time sync would.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub tag: u32,
    pub at_s: f64,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub n_tags: usize,
    /// Blinks per second per tag.
    pub blink_rate: f64,
    pub slot_width: f64,
    pub n_slots: usize,
    pub sync_period: f64,
    /// Per-tag drift is drawn uniformly in `[-clock_ppm, clock_ppm]`.
    pub clock_ppm: f64,
    pub blink_airtime: f64,
    pub sim_duration: f64,
    pub mode: MacMode,
    /// Consecutive collided blinks before the gateway re-slots a tag.
    pub correction_threshold: u32,
    /// Side-channel delay between a correction decision and the tag acting
    /// on it, seconds.
    pub correction_latency: f64,
    /// Probability that a given tag misses a given sync broadcast.
    pub sync_loss_prob: f64,
    /// Half-width of the uniform error left after each sync, seconds.
    pub sync_jitter: f64,
    /// Tags estimate their rate error from consecutive syncs and cancel it;
    /// when off, each sync only resets the offset.
    pub drift_compensation: bool,
    /// Length of the success-ratio windows in the time series, seconds.
    pub window: f64,
    #[serde(rename = "fault")]
    pub faults: Vec<Fault>,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            n_tags: 10,
            blink_rate: 100.0,
            slot_width: 1e-3,
            n_slots: 1000,
            sync_period: 100.0,
            clock_ppm: 5.0,
            blink_airtime: 200e-6,
            sim_duration: 1800.0,
            mode: MacMode::Tdma,
            correction_threshold: 5,
            correction_latency: 0.05,
            sync_loss_prob: 0.0,
            sync_jitter: 0.0,
            drift_compensation: true,
            window: 10.0,
            faults: Vec::new(),
        }
    }
}

impl MacConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| MacError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Frame period: every slot once.
    pub fn frame(&self) -> f64 {
        self.slot_width * self.n_slots as f64
    }

    /// Slots a tag owns per frame.
    pub fn slots_per_tag(&self) -> usize {
        (self.blink_rate * self.frame()).round() as usize
    }

    /// Distance between a tag's consecutive slots, and so the number of
    /// distinct base slots.
    pub fn stride(&self) -> usize {
        self.n_slots / self.slots_per_tag().max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MacError::Config(m.to_string()));
        let positive = [
            self.blink_rate,
            self.slot_width,
            self.sync_period,
            self.blink_airtime,
            self.sim_duration,
            self.window,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("rates, durations and widths must be positive and finite");
        }
        if !(self.clock_ppm.is_finite() && self.clock_ppm >= 0.0) {
            return bad("clock_ppm must be non-negative");
        }
        if !(self.correction_latency.is_finite() && self.correction_latency >= 0.0) {
            return bad("correction_latency must be non-negative");
        }
        if !(self.sync_jitter.is_finite() && self.sync_jitter >= 0.0) {
            return bad("sync_jitter must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.sync_loss_prob) {
            return bad("sync_loss_prob must lie in [0, 1]");
        }
        if self.n_tags == 0 || self.n_slots == 0 {
            return bad("need at least one tag and one slot");
        }
        if self.correction_threshold == 0 {
            return bad("correction_threshold must be at least 1");
        }
        if self.blink_airtime > self.slot_width {
            return bad("blink_airtime exceeds slot_width");
        }
        if self.mode == MacMode::Tdma {
            if self.n_tags > self.n_slots {
                return bad("more tags than slots");
            }
            let owned = self.blink_rate * self.frame();
            let k = owned.round();
            if k < 1.0 || (owned - k).abs() > 1e-9 * owned.max(1.0) || self.n_slots % k as usize != 0 {
                return bad("blink_rate x frame must be a whole number of slots dividing n_slots");
            }
        }
        for f in &self.faults {
            if f.tag as usize >= self.n_tags || !(f.at_s.is_finite() && f.at_s >= 0.0) {
                return bad("fault refers to an unknown tag or a negative time");
            }
            if self.mode == MacMode::Tdma && f.slot >= self.stride() {
                return bad("fault slot out of range");
            }
        }
        Ok(())
    }
}

/// Clock offset accumulated by a drifting clock, seconds.
pub fn drift_offset(ppm: f64, elapsed: f64) -> f64 {
    ppm * 1e-6 * elapsed
}
