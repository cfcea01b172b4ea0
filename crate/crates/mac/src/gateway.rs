//! Slot bookkeeping and the re-slotting rule.

use std::collections::BTreeMap;

use crate::error::{MacError, Result};

/// Slot table held by the gateway. A tag owns base slot `b` and every
/// `stride`-th slot after it, so there are `stride` distinct bases.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayState {
    owner: Vec<Option<u32>>,
    base_of: BTreeMap<u32, usize>,
    streak: BTreeMap<u32, u32>,
    /// Tags with a correction in flight, and when it lands (ns).
    in_flight: BTreeMap<u32, i64>,
    threshold: u32,
    latency_ns: i64,
}

/// Resolution of one blink as the gateway sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlinkOutcome {
    pub tag: u32,
    pub time_ns: i64,
    /// Tags whose blinks overlapped this one; empty when delivered.
    pub collided_with: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correction {
    pub tag: u32,
    pub from: usize,
    pub to: usize,
    /// When the tag applies the new slot, ns.
    pub effective_ns: i64,
}

impl GatewayState {
    pub fn new(stride: usize, threshold: u32, latency_ns: i64) -> Self {
        Self {
            owner: vec![None; stride],
            base_of: BTreeMap::new(),
            streak: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            threshold: threshold.max(1),
            latency_ns,
        }
    }

    pub fn base_of(&self, tag: u32) -> Option<usize> {
        self.base_of.get(&tag).copied()
    }

    pub fn free_slots(&self) -> usize {
        self.owner.iter().filter(|o| o.is_none()).count()
    }

    /// Give `tag` the lowest free base slot.
    pub fn assign_slot(&mut self, tag: u32) -> Result<usize> {
        if let Some(b) = self.base_of(tag) {
            return Ok(b);
        }
        let b = self.owner.iter().position(|o| o.is_none()).ok_or(MacError::TableFull(tag))?;
        self.owner[b] = Some(tag);
        self.base_of.insert(tag, b);
        Ok(b)
    }

    fn reslot(&mut self, tag: u32) -> Option<(usize, usize)> {
        let from = self.base_of(tag)?;
        let to = self.owner.iter().enumerate().position(|(k, o)| o.is_none() && k != from)?;
        self.owner[from] = None;
        self.owner[to] = Some(tag);
        self.base_of.insert(tag, to);
        Some((from, to))
    }
}

/// Feed resolved blinks to the gateway and collect the corrections it
/// broadcasts. A tag whose last `threshold` blinks all collided is moved
/// unless it is the lowest id in the collision, so of two tags sharing a
/// slot only the higher id moves.
pub fn detect_and_correct(gw: &mut GatewayState, log: &[BlinkOutcome]) -> Vec<Correction> {
    let mut out = Vec::new();
    for o in log {
        if let Some(&t) = gw.in_flight.get(&o.tag) {
            if o.time_ns < t {
                continue;
            }
            gw.in_flight.remove(&o.tag);
        }
        if o.collided_with.is_empty() {
            gw.streak.insert(o.tag, 0);
            continue;
        }
        let s = gw.streak.entry(o.tag).or_insert(0);
        *s += 1;
        if *s < gw.threshold {
            continue;
        }
        *s = 0;
        if o.collided_with.iter().all(|&other| other > o.tag) {
            continue;
        }
        match gw.reslot(o.tag) {
            Some((from, to)) => {
                let effective_ns = o.time_ns + gw.latency_ns;
                gw.in_flight.insert(o.tag, effective_ns);
                out.push(Correction { tag: o.tag, from, to, effective_ns });
            }
            None => log::debug!("tag {} keeps colliding but no free slot is left", o.tag),
        }
    }
    out
}
