//! Autonomous packet drop at the transport ingress.
//!
//! Before video packets are packaged into TCP segments, the sender estimates
//! how many bytes it can push before the client's buffer runs dry (plus a
//! guard interval) and drops the least important queued packets that do not
//! fit. Packets already handed to TCP are never touched.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::video::VideoPacket;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApdConfig {
    pub enabled: bool,
    /// Weight of the newest rate sample against the window mean.
    pub smoothing: f64,
    /// Number of rate samples kept.
    pub history_window: usize,
    /// TTIs aggregated into one rate sample.
    pub sample_ttis: u64,
    /// Guard time in seconds.
    pub guard_time: f64,
    /// Periodic trigger in TTIs, on top of the trigger at each segment request.
    pub cadence_ttis: u64,
    /// Byte granularity of the knapsack table; 1 solves exactly.
    pub bucket_bytes: u32,
}

impl Default for ApdConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            smoothing: 0.8,
            history_window: 10,
            sample_ttis: 100,
            guard_time: 0.5,
            cadence_ttis: 250,
            bucket_bytes: 64,
        }
    }
}

impl ApdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return Err(Error::config("apd.smoothing", "must lie strictly between 0 and 1"));
        }
        if self.history_window == 0 {
            return Err(Error::config("apd.history_window", "must be at least 1"));
        }
        if self.sample_ttis == 0 {
            return Err(Error::config("apd.sample_ttis", "must be at least 1"));
        }
        if !(self.guard_time >= 0.0 && self.guard_time.is_finite()) {
            return Err(Error::config("apd.guard_time", "must be a non-negative number of seconds"));
        }
        if self.cadence_ttis == 0 {
            return Err(Error::config("apd.cadence_ttis", "must be at least 1"));
        }
        if self.bucket_bytes == 0 {
            return Err(Error::config("apd.bucket_bytes", "must be at least 1"));
        }
        Ok(())
    }
}

/// Queue occupancy of one client at the moment APD runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueueSnapshot {
    /// Bytes waiting in the MAC buffer.
    pub mac_bytes: u64,
    /// Bytes in the TCP send path not yet delivered (pending retransmission).
    pub send_bytes: u64,
    /// Bytes in the video queue, still droppable.
    pub video_bytes: u64,
    /// Seconds of complete, unplayed video at the client.
    pub playable_s: f64,
    /// Delivery rate samples in bytes/s, oldest first.
    pub recent_rates: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DropSet {
    pub flags: Vec<bool>,
    pub dropped_bytes: u64,
    pub dropped_importance: f64,
}

impl DropSet {
    pub fn dropped_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropPlan {
    /// `f64::INFINITY` when the video queue is empty.
    pub keep_fraction: f64,
    pub budget: u64,
    pub set: DropSet,
}

/// Running totals of what APD removed from one client's stream.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApdLedger {
    pub runs: u64,
    pub dropped_packets: u64,
    pub dropped_bytes: u64,
    pub dropped_importance: f64,
}

/// Smoothed sustainable rate in bytes/s. An empty history falls back to
/// the last sample.
pub fn estimate_rate(recent_rates: &[f64], last_rate: f64, cfg: &ApdConfig) -> f64 {
    let mean = if recent_rates.is_empty() {
        last_rate
    } else {
        recent_rates.iter().sum::<f64>() / recent_rates.len() as f64
    };
    cfg.smoothing * last_rate + (1.0 - cfg.smoothing) * mean
}

/// Returns `(keep_fraction, bytes to drop)`.
pub fn drop_budget(rate: f64, snap: &QueueSnapshot, cfg: &ApdConfig) -> (f64, u64) {
    if snap.video_bytes == 0 {
        return (f64::INFINITY, 0);
    }
    let sendable = rate.max(0.0) * (snap.playable_s.max(0.0) + cfg.guard_time);
    let keep_fraction = (sendable - snap.mac_bytes as f64 - snap.send_bytes as f64) / snap.video_bytes as f64;
    if keep_fraction >= 1.0 {
        return (keep_fraction, 0);
    }
    let fraction = 1.0 - keep_fraction.min(1.0);
    // Rounded up so the dropped bytes never fall short of the real-valued target.
    // A negative keep_fraction asks for more than the queue holds; the knapsack
    // would clamp anyway. The epsilon keeps float noise from adding a byte.
    let bytes = (fraction * snap.video_bytes as f64 - 1e-9).ceil().max(0.0) as u64;
    (keep_fraction, bytes.min(snap.video_bytes))
}

type Key = (f64, u32);

fn better(a: Key, b: Key) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Min-cost cover of `cap` units. Ties: fewer items, then earliest indices.
/// Caller guarantees the cover is reachable.
fn cover_dp(costs: &[f64], units: &[usize], cap: usize) -> Vec<bool> {
    let n = costs.len();
    let inf: Key = (f64::INFINITY, u32::MAX);
    // best[c]: cheapest way to cover c units using items i.. (built backwards).
    let mut best: Vec<Key> = vec![inf; cap + 1];
    best[0] = (0.0, 0);
    let mut next = best.clone();
    let mut take = vec![false; n * (cap + 1)];
    for i in (0..n).rev() {
        for c in 0..=cap {
            let skip = best[c];
            let rest = best[c.saturating_sub(units[i])];
            let with = (rest.0 + costs[i], rest.1.saturating_add(1));
            // Ties go to taking: an earlier index makes the list smaller.
            if rest.0.is_finite() && !better(skip, with) {
                next[c] = with;
                take[i * (cap + 1) + c] = true;
            } else {
                next[c] = skip;
            }
        }
        std::mem::swap(&mut best, &mut next);
    }
    let mut flags = vec![false; n];
    let mut c = cap;
    for i in 0..n {
        if c == 0 {
            break;
        }
        if take[i * (cap + 1) + c] {
            flags[i] = true;
            c = c.saturating_sub(units[i]);
        }
    }
    debug_assert_eq!(c, 0, "cover must be reachable");
    flags
}

fn covered(items: &[(f64, u32)], flags: &[bool]) -> u64 {
    items.iter().zip(flags).filter(|(_, f)| **f).map(|(&(_, r), _)| r as u64).sum()
}

/// Largest relative gap between a bucketed answer and the bound it is
/// checked against before the bucket is halved.
pub const BUCKET_GAP: f64 = 0.05;

fn importance(items: &[(f64, u32)], flags: &[bool]) -> f64 {
    items.iter().zip(flags).filter(|(_, f)| **f).map(|(&(u, _), _)| u).sum()
}

/// Feasible cover on a `b`-byte grid (sizes down, budget up), then shed
/// packets the cover does not need, most important first.
fn restricted_cover(items: &[(f64, u32)], costs: &[f64], need: u64, mut b: u64) -> Vec<bool> {
    // Coarse sizes can make a coverable budget look uncoverable; refine.
    while b > 1 && items.iter().map(|&(_, r)| r as u64 / b).sum::<u64>() < need.div_ceil(b) {
        b /= 2;
    }
    let down: Vec<usize> = items.iter().map(|&(_, r)| (r as u64 / b) as usize).collect();
    let mut flags = cover_dp(costs, &down, need.div_ceil(b) as usize);
    let mut order: Vec<usize> = (0..items.len()).filter(|&i| flags[i]).collect();
    order.sort_by(|&x, &y| costs[y].total_cmp(&costs[x]).then(y.cmp(&x)));
    let mut have = covered(items, &flags);
    for i in order {
        let r = items[i].1 as u64;
        if have - r >= need {
            flags[i] = false;
            have -= r;
        }
    }
    flags
}

/// Cheapest-importance subset of `items = (importance, bytes)` whose bytes
/// cover `need`. Among equal-importance sets the one with fewer packets
/// wins, then the lexicographically smallest index list.
///
/// `bucket = 1` solves exactly. A coarser bucket first solves the relaxed
/// table (sizes rounded up, budget down), whose optimum bounds the true one
/// from below; if that answer really covers `need` it is optimal. Otherwise
/// the restricted table (sizes down, budget up) gives a cover, kept when it
/// is within [`BUCKET_GAP`] of the bound. Failing that the bucket is halved
/// and both are solved again.
pub fn select_drop_set(items: &[(f64, u32)], need: u64, bucket: u32) -> DropSet {
    let n = items.len();
    let total: u64 = items.iter().map(|&(_, r)| r as u64).sum();
    let costs: Vec<f64> = items.iter().map(|&(u, _)| u).collect();
    let exact = |need: u64| {
        let units: Vec<usize> = items.iter().map(|&(_, r)| r as usize).collect();
        cover_dp(&costs, &units, need as usize)
    };
    let flags = if need == 0 || n == 0 {
        vec![false; n]
    } else if need >= total {
        vec![true; n]
    } else {
        let mut b = bucket.max(1) as u64;
        loop {
            if b == 1 {
                break exact(need);
            }
            let up: Vec<usize> = items.iter().map(|&(_, r)| (r as u64).div_ceil(b) as usize).collect();
            let relaxed = cover_dp(&costs, &up, (need / b) as usize);
            if covered(items, &relaxed) >= need {
                break relaxed;
            }
            let bound = importance(items, &relaxed);
            let flags = restricted_cover(items, &costs, need, b);
            if importance(items, &flags) <= bound * (1.0 + BUCKET_GAP) + 1e-12 {
                break flags;
            }
            b /= 2;
        }
    };
    let dropped_bytes = covered(items, &flags);
    let dropped_importance = importance(items, &flags);
    DropSet {
        flags,
        dropped_bytes,
        dropped_importance,
    }
}

/// Plan a drop for the current queue state without touching the queue.
pub fn plan_drop(importances_sizes: &[(f64, u32)], snap: &QueueSnapshot, cfg: &ApdConfig) -> DropPlan {
    let last = snap.recent_rates.last().copied().unwrap_or(0.0);
    let rate = estimate_rate(&snap.recent_rates, last, cfg);
    let (keep_fraction, budget) = drop_budget(rate, snap, cfg);
    let set = select_drop_set(importances_sizes, budget, cfg.bucket_bytes);
    DropPlan { keep_fraction, budget, set }
}

/// Run APD over a client's video queue: remove the drop set in place (the
/// survivors keep their order) and record the losses on `ledger`.
///
/// `snap.video_bytes` is taken from the queue itself. Without any rate sample the
/// estimate is meaningless, so nothing is dropped.
pub fn apply_apd(
    queue: &mut VecDeque<VideoPacket>,
    snap: &QueueSnapshot,
    cfg: &ApdConfig,
    ledger: &mut ApdLedger,
) -> DropPlan {
    let items: Vec<(f64, u32)> = queue.iter().map(|p| (p.importance, p.size)).collect();
    let snap = QueueSnapshot {
        video_bytes: items.iter().map(|&(_, r)| r as u64).sum(),
        ..snap.clone()
    };
    if snap.recent_rates.is_empty() {
        return DropPlan {
            keep_fraction: f64::INFINITY,
            budget: 0,
            set: DropSet {
                flags: vec![false; items.len()],
                ..Default::default()
            },
        };
    }
    let plan = plan_drop(&items, &snap, cfg);
    ledger.runs += 1;
    if plan.set.dropped_bytes > 0 {
        let mut flags = plan.set.flags.iter();
        queue.retain(|_| !*flags.next().unwrap());
        ledger.dropped_packets += plan.set.dropped_count() as u64;
        ledger.dropped_bytes += plan.set.dropped_bytes;
        ledger.dropped_importance += plan.set.dropped_importance;
    }
    plan
}
