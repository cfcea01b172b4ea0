use std::io::{self, Write};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagStats {
    pub tag_id: u32,
    pub sent: u64,
    pub delivered: u64,
    pub collided: u64,
    /// Largest gap between a blink's actual and ideal transmit time, seconds.
    pub max_slot_error_s: f64,
    /// Base slot at the end of the run; `None` when unslotted or rejected.
    pub slot: Option<usize>,
}

impl TagStats {
    pub fn ratio(&self) -> f64 {
        if self.sent == 0 {
            1.0
        } else {
            self.delivered as f64 / self.sent as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStat {
    pub window_start_s: f64,
    pub tag_id: u32,
    pub sent: u64,
    pub delivered: u64,
}

impl WindowStat {
    pub fn ratio(&self) -> f64 {
        self.delivered as f64 / self.sent as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub time_s: f64,
    pub tags: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRecord {
    pub decided_s: f64,
    pub effective_s: f64,
    pub tag: u32,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacReport {
    pub tags: Vec<TagStats>,
    /// Row per (window, tag) with at least one blink, window-major.
    pub windows: Vec<WindowStat>,
    pub collisions: Vec<CollisionEvent>,
    pub corrections: Vec<CorrectionRecord>,
    /// Tags refused at onboarding because the slot table was full.
    pub rejected: Vec<u32>,
}

impl MacReport {
    /// Delivered over sent, pooled across tags.
    pub fn overall_success(&self) -> f64 {
        let sent: u64 = self.tags.iter().map(|t| t.sent).sum();
        let delivered: u64 = self.tags.iter().map(|t| t.delivered).sum();
        if sent == 0 {
            1.0
        } else {
            delivered as f64 / sent as f64
        }
    }

    /// Mean of the per-tag ratios over tags that sent anything.
    pub fn mean_success(&self) -> f64 {
        let r: Vec<f64> = self.tags.iter().filter(|t| t.sent > 0).map(TagStats::ratio).collect();
        if r.is_empty() {
            1.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }

    pub fn ratio_range(&self) -> (f64, f64) {
        self.tags
            .iter()
            .filter(|t| t.sent > 0)
            .map(TagStats::ratio)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// `tag_id,sent,delivered,ratio`
    pub fn write_summary_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "tag_id,sent,delivered,ratio")?;
        for t in &self.tags {
            writeln!(w, "{},{},{},{:.9e}", t.tag_id, t.sent, t.delivered, t.ratio())?;
        }
        Ok(())
    }

    /// `window_start_s,tag_id,ratio`
    pub fn write_windows_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "window_start_s,tag_id,ratio")?;
        for s in &self.windows {
            writeln!(w, "{:.9e},{},{:.9e}", s.window_start_s, s.tag_id, s.ratio())?;
        }
        Ok(())
    }
}
