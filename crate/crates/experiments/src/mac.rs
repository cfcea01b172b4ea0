//! MAC simulation runs as result tables.

use sha2::{Digest, Sha256};

use uwbloc_mac::{run_mac, MacConfig, MacReport};

use crate::error::Result;
use crate::table::ResultTable;
use crate::trial::trial_rng;

pub const SUMMARY_COLUMNS: [&str; 4] = ["tag_id", "sent", "delivered", "ratio"];
pub const WINDOW_COLUMNS: [&str; 3] = ["window_start_s", "tag_id", "ratio"];

#[derive(Debug, Clone)]
pub struct MacRun {
    pub report: MacReport,
    pub summary: ResultTable,
    pub windows: ResultTable,
}

pub fn config_digest(cfg: &MacConfig) -> String {
    let text = toml::to_string(cfg).expect("mac config serialises");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn run_mac_tables(cfg: &MacConfig, seed: u64) -> Result<MacRun> {
    let report = run_mac(cfg, &mut trial_rng(seed, 0, 0))?;
    let digest = config_digest(cfg);
    let mut summary = ResultTable::new(&SUMMARY_COLUMNS, seed, &digest);
    for t in &report.tags {
        summary.push(vec![t.tag_id.into(), t.sent.into(), t.delivered.into(), t.ratio().into()]);
    }
    summary.set_meta("overall_success", format!("{:.9e}", report.overall_success()));
    summary.set_meta("mean_success", format!("{:.9e}", report.mean_success()));
    let mut windows = ResultTable::new(&WINDOW_COLUMNS, seed, &digest);
    for w in &report.windows {
        windows.push(vec![w.window_start_s.into(), w.tag_id.into(), w.ratio().into()]);
    }
    Ok(MacRun { report, summary, windows })
}
