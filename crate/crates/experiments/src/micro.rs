//! One-factor-at-a-time sweeps around the 6-antenna, 1 m array.

use std::fmt;
use std::str::FromStr;

use uwbloc_core::estimator::Modality;

use crate::error::{ExpError, Result};
use crate::scenario::{CalibrationMode, Layout, Scenario};
use crate::sweep::cell_stats;
use crate::table::ResultTable;

pub const MICRO_COLUMNS: [&str; 5] = ["axis", "sweep_value", "median_err_m", "p90_err_m", "trials"];

pub const APERTURES: [f64; 4] = [1.0, 0.8, 0.6, 0.4];
pub const ANTENNA_COUNTS: [usize; 3] = [6, 5, 4];
/// Sub-lattice pair of the co-prime pattern.
pub const COPRIME_PAIR: (usize, usize) = (3, 4);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Modality,
    Aperture,
    Antennas,
    Pattern,
    Calibration,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::Modality, Axis::Aperture, Axis::Antennas, Axis::Pattern, Axis::Calibration];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Modality => "modality",
            Axis::Aperture => "aperture",
            Axis::Antennas => "antennas",
            Axis::Pattern => "pattern",
            Axis::Calibration => "calibration",
        }
    }

    /// Labelled variants of `base` along this axis.
    pub fn variants(&self, base: &Scenario) -> Vec<(String, Scenario)> {
        let ula = |count, aperture| Scenario { layout: Layout::Ula { count, aperture }, ..base.clone() };
        match self {
            Axis::Modality => [("tdoa_only", Modality::TdoaOnly), ("pdoa_only", Modality::PdoaOnly), ("fused", Modality::Fused)]
                .into_iter()
                .map(|(l, m)| (l.to_string(), Scenario { modality: m, ..ula(6, 1.0) }))
                .collect(),
            Axis::Aperture => APERTURES.iter().map(|&a| (format!("{a}"), ula(6, a))).collect(),
            Axis::Antennas => ANTENNA_COUNTS.iter().map(|&n| (format!("{n}"), ula(n, 1.0))).collect(),
            Axis::Pattern => vec![
                ("ula".into(), ula(6, 1.0)),
                (
                    "coprime".into(),
                    Scenario { layout: Layout::Coprime { count: 6, aperture: 1.0, pair: COPRIME_PAIR }, ..base.clone() },
                ),
            ],
            Axis::Calibration => {
                let bias = Some(base.bias.unwrap_or_default());
                [("on", CalibrationMode::ThreePoint), ("off", CalibrationMode::Ignored)]
                    .into_iter()
                    .map(|(l, c)| (l.to_string(), Scenario { calibration: c, bias, ..ula(6, 1.0) }))
                    .collect()
            }
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = ExpError;
    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ExpError::Config(format!("unknown microbenchmark axis {s:?}")))
    }
}

/// Sweep each axis in turn. All cells share tag positions.
pub fn run_microbench(base: &Scenario, axes: &[Axis]) -> Result<ResultTable> {
    let mut table = ResultTable::new(&MICRO_COLUMNS, base.seed, &base.digest());
    for axis in axes {
        for (label, s) in axis.variants(base) {
            let c = cell_stats(&s)?;
            table.push(vec![axis.name().into(), label.as_str().into(), c.median.into(), c.p90.into(), s.trials.into()]);
        }
    }
    Ok(table)
}

/// Rows of `table` for one axis as `(label, median, p90)`.
pub fn axis_rows(table: &ResultTable, axis: Axis) -> Vec<(String, f64, f64)> {
    let col = |n| table.column(n).expect("microbench column");
    let (a, v, m, p) = (col("axis"), col("sweep_value"), col("median_err_m"), col("p90_err_m"));
    table
        .rows
        .iter()
        .filter(|r| matches!(&r[a], crate::table::Value::Text(s) if s == axis.name()))
        .map(|r| {
            let label = match &r[v] {
                crate::table::Value::Text(s) => s.clone(),
                other => format!("{other:?}"),
            };
            (label, r[m].as_f64().unwrap_or(f64::NAN), r[p].as_f64().unwrap_or(f64::NAN))
        })
        .collect()
}
