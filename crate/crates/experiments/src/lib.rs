//! Monte-Carlo drivers for the single-array localization study and the CSV
//! tables they produce.

pub mod ambiguity;
pub mod calib;
pub mod error;
pub mod heatmap;
pub mod mac;
pub mod micro;
pub mod scenario;
pub mod sweep;
pub mod table;
pub mod track;
pub mod trajectory;
pub mod trial;

pub use ambiguity::{run_ambiguity_maps, AmbiguityMaps};
pub use calib::{run_calibration_demo, CalibrationDemo};
pub use error::{ExpError, Result};
pub use heatmap::{run_heatmap, Heatmap};
pub use mac::{run_mac_tables, MacRun};
pub use micro::{run_microbench, Axis};
pub use scenario::{CalibrationMode, EstimatorKind, Layout, PfSettings, Scenario};
pub use sweep::run_noise_sweep;
pub use table::{median, percentile, ResultTable, Value};
pub use track::run_tracking;
pub use trial::{Outcome, Runner};
