//! Per-location error maps.

use uwbloc_core::geometry::eval_grid;

use crate::error::Result;
use crate::scenario::Scenario;
use crate::table::{median, percentile, ResultTable};
use crate::trial::{trial_rng, Runner};

pub const HEATMAP_COLUMNS: [&str; 6] = ["x", "y", "median_err_m", "p90_err_m", "trials", "flagged"];

#[derive(Debug, Clone)]
pub struct Heatmap {
    pub table: ResultTable,
    /// Median and 90th percentile over every trial at every point.
    pub median: f64,
    pub p90: f64,
}

/// Localize `trials` times at every lattice point, rows in row-major order.
/// Trials whose estimator failed still count; `flagged` says how many.
pub fn run_heatmap(scenario: &Scenario) -> Result<Heatmap> {
    let runner = Runner::new(scenario)?;
    let grid = eval_grid(&scenario.environment, scenario.grid_res)?;
    let mut table = ResultTable::new(&HEATMAP_COLUMNS, scenario.seed, &scenario.digest());
    let mut all = Vec::with_capacity(grid.len() * scenario.trials);
    let mut errors = Vec::with_capacity(scenario.trials);
    for (k, p) in grid.points().enumerate() {
        errors.clear();
        let mut flagged = 0usize;
        for t in 0..scenario.trials {
            let out = runner.run(p, &mut trial_rng(scenario.seed, k as u64, t as u64))?;
            errors.push(out.error);
            flagged += out.flagged as usize;
        }
        all.extend_from_slice(&errors);
        table.push(vec![
            p.x.into(),
            p.y.into(),
            median(&errors).into(),
            percentile(&errors, 0.9).into(),
            scenario.trials.into(),
            flagged.into(),
        ]);
    }
    let (med, p90) = (median(&all), percentile(&all, 0.9));
    table.set_meta("global_median_err_m", format!("{med:.9e}"));
    table.set_meta("global_p90_err_m", format!("{p90:.9e}"));
    Ok(Heatmap { table, median: med, p90 })
}
