//! Event loop. Time is kept in integer nanoseconds so event order never
//! depends on float rounding.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::config::{MacConfig, MacMode};
use crate::error::Result;
use crate::gateway::{detect_and_correct, BlinkOutcome, GatewayState};
use crate::report::{CollisionEvent, CorrectionRecord, MacReport, TagStats, WindowStat};

const NS: f64 = 1e9;

fn to_ns(t: f64) -> i64 {
    (t * NS).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    // Variant order breaks ties at equal times: a blink ending at t does not
    // overlap one starting at t.
    TxEnd { blink: u64 },
    Sync,
    Reslot { tag: u32, base: usize, fault: bool },
    TxStart { tag: u32, generation: u64 },
}

#[derive(Debug, Clone)]
struct Tag {
    active: bool,
    ppm: f64,
    /// The tag's own estimate of `ppm`.
    est_ppm: f64,
    base: usize,
    phase: f64,
    sync_at: f64,
    sync_err: f64,
    next: i64,
    generation: u64,
}

impl Tag {
    fn rate_factor(&self) -> f64 {
        (1.0 + self.ppm * 1e-6) / (1.0 + self.est_ppm * 1e-6)
    }
}

struct OnAir {
    id: u64,
    tag: u32,
    start_ns: i64,
    partners: Vec<u32>,
}

struct Sim<'a, R: Rng> {
    cfg: &'a MacConfig,
    rng: &'a mut R,
    period: f64,
    duration_ns: i64,
    tags: Vec<Tag>,
    gateway: GatewayState,
    heap: BinaryHeap<Reverse<(i64, Event, u64)>>,
    seq: u64,
    on_air: Vec<OnAir>,
    blink_ids: u64,
    stats: Vec<TagStats>,
    windows: Vec<Vec<(u64, u64)>>,
    collisions: Vec<CollisionEvent>,
    corrections: Vec<CorrectionRecord>,
}

impl<'a, R: Rng> Sim<'a, R> {
    fn push(&mut self, t: i64, e: Event) {
        self.seq += 1;
        self.heap.push(Reverse((t, e, self.seq)));
    }

    /// Transmit offset of blink `m` in ideal global time.
    fn target(&self, tag: &Tag, m: i64) -> f64 {
        let start = match self.cfg.mode {
            MacMode::Tdma => (tag.base as f64 + 0.5) * self.cfg.slot_width - 0.5 * self.cfg.blink_airtime,
            MacMode::Unslotted => tag.phase,
        };
        start + m as f64 * self.period
    }

    /// Global time at which the tag's clock reads `local`.
    fn global_time(tag: &Tag, local: f64) -> f64 {
        tag.sync_at + (local - tag.sync_at - tag.sync_err) / tag.rate_factor()
    }

    /// Schedule the tag's first blink at or after `now_ns`, never going back
    /// before `floor` in blink index.
    fn schedule(&mut self, k: usize, now_ns: i64, floor: i64) {
        let tag = &self.tags[k];
        if !tag.active {
            return;
        }
        let now = now_ns as f64 / NS;
        let local_now = tag.sync_at + tag.sync_err + (now - tag.sync_at) * tag.rate_factor();
        let mut m = ((local_now - self.target(tag, 0)) / self.period).ceil() as i64;
        m = m.max(floor);
        while m > floor && to_ns(Self::global_time(tag, self.target(tag, m - 1))) >= now_ns {
            m -= 1;
        }
        while to_ns(Self::global_time(tag, self.target(tag, m))) < now_ns {
            m += 1;
        }
        let t = to_ns(Self::global_time(tag, self.target(tag, m)));
        let generation = tag.generation + 1;
        self.tags[k].generation = generation;
        self.tags[k].next = m;
        if t < self.duration_ns {
            self.push(t, Event::TxStart { tag: k as u32, generation });
        }
    }

    fn tx_start(&mut self, now: i64, k: usize) {
        let tag = &self.tags[k];
        let m = tag.next;
        let error = (now as f64 / NS - self.target(tag, m)).abs();
        let st = &mut self.stats[k];
        st.sent += 1;
        st.max_slot_error_s = st.max_slot_error_s.max(error);
        let w = self.window_of(now);
        self.windows[w][k].0 += 1;

        self.blink_ids += 1;
        let id = self.blink_ids;
        let mut partners = Vec::new();
        for other in &mut self.on_air {
            partners.push(other.tag);
            other.partners.push(k as u32);
        }
        if !partners.is_empty() {
            let mut tags = partners.clone();
            tags.push(k as u32);
            tags.sort_unstable();
            tags.dedup();
            self.collisions.push(CollisionEvent { time_s: now as f64 / NS, tags });
        }
        self.on_air.push(OnAir { id, tag: k as u32, start_ns: now, partners });
        self.push(now + to_ns(self.cfg.blink_airtime), Event::TxEnd { blink: id });

        let floor = m + 1;
        self.tags[k].next = floor;
        let t = to_ns(Self::global_time(&self.tags[k], self.target(&self.tags[k], floor)));
        if t < self.duration_ns {
            let generation = self.tags[k].generation;
            self.push(t.max(now), Event::TxStart { tag: k as u32, generation });
        }
    }

    fn tx_end(&mut self, blink: u64) {
        let pos = self.on_air.iter().position(|b| b.id == blink).expect("blink on air");
        let mut b = self.on_air.swap_remove(pos);
        b.partners.sort_unstable();
        b.partners.dedup();
        let k = b.tag as usize;
        let w = self.window_of(b.start_ns);
        if b.partners.is_empty() {
            self.stats[k].delivered += 1;
            self.windows[w][k].1 += 1;
        } else {
            self.stats[k].collided += 1;
        }
        if self.cfg.mode == MacMode::Tdma {
            let outcome = BlinkOutcome { tag: b.tag, time_ns: b.start_ns, collided_with: b.partners };
            for c in detect_and_correct(&mut self.gateway, &[outcome]) {
                self.corrections.push(CorrectionRecord {
                    decided_s: b.start_ns as f64 / NS,
                    effective_s: c.effective_ns as f64 / NS,
                    tag: c.tag,
                    from: c.from,
                    to: c.to,
                });
                self.push(c.effective_ns, Event::Reslot { tag: c.tag, base: c.to, fault: false });
            }
        }
    }

    fn sync(&mut self, now: i64) {
        let t = now as f64 / NS;
        for k in 0..self.tags.len() {
            let lost = self.rng.gen::<f64>() < self.cfg.sync_loss_prob;
            let err = self.jitter();
            if lost || !self.tags[k].active {
                continue;
            }
            let tag = &mut self.tags[k];
            if self.cfg.drift_compensation && t > tag.sync_at {
                // Raw ticks counted since the last sync, against the elapsed
                // global time the broadcasts carry.
                let raw = (t - tag.sync_at) * (1.0 + tag.ppm * 1e-6) + err - tag.sync_err;
                tag.est_ppm = (raw / (t - tag.sync_at) - 1.0) * 1e6;
            }
            tag.sync_at = t;
            tag.sync_err = err;
            let floor = self.tags[k].next;
            self.schedule(k, now, floor);
        }
    }

    fn jitter(&mut self) -> f64 {
        if self.cfg.sync_jitter > 0.0 {
            self.rng.gen_range(-self.cfg.sync_jitter..=self.cfg.sync_jitter)
        } else {
            0.0
        }
    }

    fn window_of(&self, t_ns: i64) -> usize {
        ((t_ns as f64 / NS / self.cfg.window) as usize).min(self.windows.len() - 1)
    }
}

/// Simulate `cfg.n_tags` tags blinking for `cfg.sim_duration` seconds.
///
/// Tags are onboarded in id order at time zero and synced then; in TDMA mode
/// the gateway re-broadcasts sync every `sync_period`. A blink is delivered
/// iff no other blink's airtime overlaps it.
pub fn run_mac<R: Rng>(cfg: &MacConfig, rng: &mut R) -> Result<MacReport> {
    cfg.validate()?;
    let n = cfg.n_tags;
    let stride = match cfg.mode {
        MacMode::Tdma => cfg.stride(),
        MacMode::Unslotted => 1,
    };
    let period = 1.0 / cfg.blink_rate;
    let mut gateway = GatewayState::new(stride, cfg.correction_threshold, to_ns(cfg.correction_latency));

    let mut tags = Vec::with_capacity(n);
    for _ in 0..n {
        let ppm = if cfg.clock_ppm > 0.0 { rng.gen_range(-cfg.clock_ppm..=cfg.clock_ppm) } else { 0.0 };
        tags.push(Tag { active: true, ppm, est_ppm: 0.0, base: 0, phase: 0.0, sync_at: 0.0, sync_err: 0.0, next: 0, generation: 0 });
    }
    let mut rejected = Vec::new();
    match cfg.mode {
        MacMode::Unslotted => {
            for t in &mut tags {
                t.phase = rng.gen_range(0.0..period);
            }
        }
        MacMode::Tdma => {
            for (k, t) in tags.iter_mut().enumerate() {
                match gateway.assign_slot(k as u32) {
                    Ok(b) => t.base = b,
                    Err(e) => {
                        log::warn!("{e}");
                        t.active = false;
                        rejected.push(k as u32);
                    }
                }
                if cfg.sync_jitter > 0.0 {
                    t.sync_err = rng.gen_range(-cfg.sync_jitter..=cfg.sync_jitter);
                }
            }
        }
    }

    let n_windows = ((cfg.sim_duration / cfg.window).ceil() as usize).max(1);
    let stats = (0..n)
        .map(|k| TagStats {
            tag_id: k as u32,
            slot: (cfg.mode == MacMode::Tdma && tags[k].active).then_some(tags[k].base),
            ..Default::default()
        })
        .collect();
    let mut sim = Sim {
        cfg,
        rng,
        period,
        duration_ns: to_ns(cfg.sim_duration),
        tags,
        gateway,
        heap: BinaryHeap::new(),
        seq: 0,
        on_air: Vec::new(),
        blink_ids: 0,
        stats,
        windows: vec![vec![(0, 0); n]; n_windows],
        collisions: Vec::new(),
        corrections: Vec::new(),
    };

    for k in 0..n {
        sim.schedule(k, 0, 0);
    }
    if cfg.mode == MacMode::Tdma {
        let mut k = 1u64;
        loop {
            let t = to_ns(k as f64 * cfg.sync_period);
            if t >= sim.duration_ns {
                break;
            }
            sim.push(t, Event::Sync);
            k += 1;
        }
    }
    for f in &cfg.faults {
        sim.push(to_ns(f.at_s), Event::Reslot { tag: f.tag, base: f.slot, fault: true });
    }

    while let Some(Reverse((now, ev, _))) = sim.heap.pop() {
        match ev {
            Event::TxEnd { blink } => sim.tx_end(blink),
            Event::Sync => sim.sync(now),
            Event::Reslot { tag, base, fault } => {
                let k = tag as usize;
                if !sim.tags[k].active {
                    continue;
                }
                if fault {
                    log::debug!("fault: tag {tag} jumps to slot {base}");
                }
                sim.tags[k].base = base;
                sim.schedule(k, now, 0);
            }
            Event::TxStart { tag, generation } => {
                if sim.tags[tag as usize].generation == generation {
                    sim.tx_start(now, tag as usize);
                }
            }
        }
    }

    for (k, st) in sim.stats.iter_mut().enumerate() {
        if cfg.mode == MacMode::Tdma && sim.tags[k].active {
            st.slot = Some(sim.tags[k].base);
        }
    }
    let mut windows = Vec::new();
    for (w, row) in sim.windows.iter().enumerate() {
        for (k, &(sent, delivered)) in row.iter().enumerate() {
            if sent > 0 {
                windows.push(WindowStat { window_start_s: w as f64 * cfg.window, tag_id: k as u32, sent, delivered });
            }
        }
    }
    Ok(MacReport { tags: sim.stats, windows, collisions: sim.collisions, corrections: sim.corrections, rejected })
}
