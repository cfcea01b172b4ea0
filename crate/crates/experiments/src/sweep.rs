//! Error statistics over random tag positions, for noise sweeps and the
//! microbenchmarks.
//!
//! Every cell of a sweep replays the same random numbers: tag positions come
//! from stream 0 and measurement noise from stream 1, so trial `t` of a
//! noisier cell sees the same standard-normal draws scaled up. Differences
//! between cells then come from the swept parameter, not from sampling.

use uwbloc_core::measurement::NoiseModel;

use crate::error::Result;
use crate::scenario::Scenario;
use crate::table::{median, percentile, ResultTable};
use crate::trial::{trial_rng, Runner};

pub const SWEEP_COLUMNS: [&str; 5] = ["sigma_theta_rad", "sigma_t_s", "median_err_m", "p90_err_m", "trials"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub median: f64,
    pub p90: f64,
    pub flagged: usize,
}

/// Errors of `scenario.trials` random-position trials.
pub fn cell_errors(scenario: &Scenario) -> Result<(Vec<f64>, usize)> {
    let runner = Runner::new(scenario)?;
    let mut errors = Vec::with_capacity(scenario.trials);
    let mut flagged = 0;
    for t in 0..scenario.trials as u64 {
        let truth = scenario.random_tag(&mut trial_rng(scenario.seed, 0, t));
        let out = runner.run(truth, &mut trial_rng(scenario.seed, 1, t))?;
        errors.push(out.error);
        flagged += out.flagged as usize;
    }
    Ok((errors, flagged))
}

pub fn cell_stats(scenario: &Scenario) -> Result<CellStats> {
    let (e, flagged) = cell_errors(scenario)?;
    Ok(CellStats { median: median(&e), p90: percentile(&e, 0.9), flagged })
}

/// Cross product of PDoA and TDoA noise levels; rows run over `sigma_t`
/// fastest.
pub fn run_noise_sweep(base: &Scenario, sigma_theta: &[f64], sigma_t: &[f64]) -> Result<ResultTable> {
    let mut table = ResultTable::new(&SWEEP_COLUMNS, base.seed, &base.digest());
    for &st in sigma_theta {
        for &tt in sigma_t {
            let s = Scenario { noise: NoiseModel { sigma_t: tt, sigma_theta: st, ..base.noise }, ..base.clone() };
            let c = cell_stats(&s)?;
            table.push(vec![st.into(), tt.into(), c.median.into(), c.p90.into(), base.trials.into()]);
        }
    }
    Ok(table)
}
