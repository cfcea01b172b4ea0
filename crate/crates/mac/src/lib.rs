//! Discrete-event model of a slotted UWB blink schedule managed over a
//! side channel: onboarding, periodic time sync, drifting tag clocks,
//! collision detection and re-slotting, plus an unslotted baseline.

mod config;
mod error;
mod gateway;
mod report;
mod sim;

pub use config::{drift_offset, Fault, MacConfig, MacMode};
pub use error::{MacError, Result};
pub use gateway::{detect_and_correct, BlinkOutcome, Correction, GatewayState};
pub use report::{CollisionEvent, CorrectionRecord, MacReport, TagStats, WindowStat};
pub use sim::run_mac;
