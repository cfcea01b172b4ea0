//! Three-point calibration on one draw of hardware biases.

use uwbloc_core::calibration::CalibrationParams;

use crate::error::Result;
use crate::scenario::Scenario;
use crate::table::ResultTable;
use crate::trial::{three_point_calibration, trial_rng};

pub const CALIB_COLUMNS: [&str; 5] = ["anchor", "distance_m", "true_bias_rad", "fitted_bias_rad", "abs_err_rad"];

/// Distances at which the fitted curves are compared with the truth; none
/// coincides with a calibration position.
pub fn held_out_distances() -> Vec<f64> {
    (0..10).map(|k| 0.6 + 0.2 * k as f64 + 0.05).collect()
}

#[derive(Debug, Clone)]
pub struct CalibrationDemo {
    pub truth: Vec<CalibrationParams>,
    pub fitted: Vec<CalibrationParams>,
    pub table: ResultTable,
    pub max_abs_err: f64,
}

/// Draw biases from the scenario's ranges (defaults when unset), calibrate
/// with the scenario's PDoA noise, and tabulate both curves.
pub fn run_calibration_demo(scenario: &Scenario) -> Result<CalibrationDemo> {
    let mut rng = trial_rng(scenario.seed, 0, 0);
    let ranges = scenario.bias.unwrap_or_default();
    let array = scenario.array()?;
    let truth = ranges.sample(array.len(), &mut rng);
    let world = array.with_calibration(truth.clone())?;
    let fitted = three_point_calibration(
        &world,
        &scenario.environment,
        scenario.noise.sigma_theta,
        scenario.calibration_packets,
        &mut rng,
    )?;

    let mut table = ResultTable::new(&CALIB_COLUMNS, scenario.seed, &scenario.digest());
    let mut max_abs_err: f64 = 0.0;
    for (k, (t, f)) in truth.iter().zip(&fitted).enumerate() {
        for d in held_out_distances() {
            let (bt, bf) = (t.bias(d)?, f.bias(d)?);
            max_abs_err = max_abs_err.max((bt - bf).abs());
            table.push(vec![k.into(), d.into(), bt.into(), bf.into(), (bt - bf).abs().into()]);
        }
    }
    Ok(CalibrationDemo { truth, fitted, table, max_abs_err })
}
