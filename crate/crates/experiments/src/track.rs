//! A particle filter following a moving tag, packet by packet.

use std::time::Instant;

use rand::Rng;

use crate::error::{ExpError, Result};
use crate::scenario::Scenario;
use crate::table::ResultTable;
use crate::trial::{trial_rng, Runner};

pub const TRACK_COLUMNS: [&str; 6] = ["t", "true_x", "true_y", "est_x", "est_y", "err_m"];
pub const LATENCY_COLUMN: &str = "pf_latency_s";

/// Run the filter once along the scenario's trajectory, cold start included.
/// With `timing` each row also carries the update's wall time, which makes
/// the table machine-dependent.
pub fn run_tracking(scenario: &Scenario, timing: bool) -> Result<ResultTable> {
    let spec = scenario
        .trajectory
        .as_ref()
        .ok_or_else(|| ExpError::Config("track needs a [trajectory] section".into()))?;
    let path = spec.sample(&scenario.environment)?;
    let runner = Runner::new(scenario)?;

    let mut columns = TRACK_COLUMNS.to_vec();
    if timing {
        columns.push(LATENCY_COLUMN);
    }
    let mut table = ResultTable::new(&columns, scenario.seed, &scenario.digest());

    let mut rng = trial_rng(scenario.seed, 0, 0);
    let (world, assumed) = runner.arrays(&mut rng)?;
    let mut pf = runner.particle_filter(rng.gen())?;
    pf.set_process_noise(spec.process_noise());
    for (t, truth) in path {
        let m = runner.measure(&truth, &world, &mut rng)?;
        let start = Instant::now();
        let est = pf.update(&m, &assumed, &runner.spec)?;
        let latency = start.elapsed().as_secs_f64();
        let mut row = vec![t.into(), truth.x.into(), truth.y.into(), est.x.into(), est.y.into(), est.distance(&truth).into()];
        if timing {
            row.push(latency.into());
        }
        table.push(row);
    }
    Ok(table)
}
