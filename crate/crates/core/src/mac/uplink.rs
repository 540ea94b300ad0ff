//! ACK-urgency and congestion-aware uplink allocation (TU).
//!
//! Every pending ACK gets a priority from three tiers: ACKs close to
//! triggering a sender timeout first, then ACKs of flows still in slow
//! start (closer to ssthresh ranks higher), then the rest. An RB is worth
//! the priority of the extra ACKs it lets a client send this TTI.

use serde::{Deserialize, Serialize};

use super::Allocation;
use crate::channel::{CqiGrid, McsTable};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UplinkConfig {
    /// Numerator for ACKs close to their RTO deadline.
    pub deadline_weight: f64,
    /// Numerator while the sender is still below ssthresh.
    pub growth_weight: f64,
    /// Numerator once the sender is past ssthresh.
    pub probe_weight: f64,
    /// Floor on the deadline in seconds.
    pub min_deadline_s: f64,
    /// Floor on the window gap in bytes.
    pub min_window_gap: f64,
}

impl Default for UplinkConfig {
    fn default() -> Self {
        Self {
            deadline_weight: 1e6,
            growth_weight: 1e3,
            probe_weight: 1.0,
            min_deadline_s: 1e-6,
            min_window_gap: 1.0,
        }
    }
}

impl UplinkConfig {
    pub fn validate(&self) -> Result<()> {
        let (d, g, p) = (self.deadline_weight, self.growth_weight, self.probe_weight);
        if !(d > g && g > p && p > 0.0) {
            return Err(Error::config("uplink", "need deadline_weight > growth_weight > probe_weight > 0"));
        }
        if !(self.min_deadline_s > 0.0) {
            return Err(Error::config("uplink.min_deadline_s", "must be positive"));
        }
        if !(self.min_window_gap > 0.0) {
            return Err(Error::config("uplink.min_window_gap", "must be positive"));
        }
        Ok(())
    }
}

/// Time left before the sender's RTO fires for a packet sent at `sent`.
pub fn ack_deadline(rto: f64, now: f64, sent: f64) -> f64 {
    rto - (now - sent)
}

pub fn ack_priority(deadline: f64, threshold: f64, cwnd: f64, ssthresh: f64, cfg: &UplinkConfig) -> f64 {
    if deadline < threshold {
        cfg.deadline_weight / deadline.max(cfg.min_deadline_s)
    } else if cwnd < ssthresh {
        cfg.growth_weight / (ssthresh - cwnd)
    } else {
        cfg.probe_weight / (cwnd - ssthresh).max(cfg.min_window_gap)
    }
}

/// Laplace-smoothed share of rebuffering events, always inside (0, 1).
pub fn playback_weight(own_events: u64, total_events: u64, clients: usize) -> f64 {
    (own_events as f64 + 1.0) / (total_events as f64 + clients as f64)
}

/// Largest FIFO prefix of `sizes` fitting in `capacity` bytes.
pub fn scheduled_count(sizes: &[u32], capacity: u64) -> usize {
    let mut used = 0u64;
    for (i, &s) in sizes.iter().enumerate() {
        used += s as u64;
        if used > capacity {
            return i;
        }
    }
    sizes.len()
}

/// Per-ACK schedule flags for the prefix rule.
pub fn schedule_flags(sizes: &[u32], capacity: u64) -> Vec<bool> {
    let z = scheduled_count(sizes, capacity);
    (0..sizes.len()).map(|i| i < z).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendingAck {
    /// Bytes still to send.
    pub size: u32,
    /// Send time of the data packet this ACK answers.
    pub sent: f64,
}

/// One client's uplink view for a TTI.
#[derive(Clone, Debug, PartialEq)]
pub struct UplinkClient {
    pub acks: Vec<PendingAck>,
    pub cwnd: f64,
    pub ssthresh: f64,
    pub rto: f64,
    pub urgency_share: f64,
}

impl UplinkClient {
    pub fn pending_bytes(&self) -> u64 {
        self.acks.iter().map(|a| a.size as u64).sum()
    }

    pub fn priorities(&self, now: f64, cfg: &UplinkConfig) -> Vec<f64> {
        let threshold = self.urgency_share * self.rto;
        self.acks
            .iter()
            .map(|a| {
                let d = ack_deadline(self.rto, now, a.sent);
                ack_priority(d, threshold, self.cwnd, self.ssthresh, cfg)
            })
            .collect()
    }
}

/// Priority mass unlocked by `capacity` bytes under the prefix rule.
fn prefix_value(sizes: &[u32], priorities: &[f64], capacity: u64) -> f64 {
    priorities[..scheduled_count(sizes, capacity)].iter().sum()
}

/// Gain from adding `rb` to `client`'s set; `None` when the weaker CQI
/// would not raise the client's capacity.
pub fn rb_utility(
    client: usize,
    rb: usize,
    alloc: &Allocation,
    grid: &CqiGrid,
    table: &McsTable,
    sizes: &[u32],
    priorities: &[f64],
) -> Option<f64> {
    let before = alloc.capacity[client];
    let after = alloc.capacity_with(client, rb, grid, table);
    if !alloc.rbs[client].is_empty() && after <= before {
        return None;
    }
    Some(prefix_value(sizes, priorities, after as u64) - prefix_value(sizes, priorities, before as u64))
}

/// Greedy per-RB allocation over ACK queues. RBs are visited in index
/// order; each goes to the client with the highest utility (ties: higher
/// head-of-queue priority, then lower index). A client leaves once its
/// capacity covers everything it has pending.
pub fn tu_allocate(
    grid: &CqiGrid,
    clients: &[UplinkClient],
    now: f64,
    table: &McsTable,
    cfg: &UplinkConfig,
) -> Allocation {
    assert_eq!(clients.len(), grid.clients());
    let mut alloc = Allocation::empty(grid.clients(), grid.rbs());
    let sizes: Vec<Vec<u32>> = clients
        .iter()
        .map(|c| c.acks.iter().map(|a| a.size).collect())
        .collect();
    let prio: Vec<Vec<f64>> = clients.iter().map(|c| c.priorities(now, cfg)).collect();
    let pending: Vec<u64> = clients.iter().map(UplinkClient::pending_bytes).collect();
    let mut active: Vec<bool> = pending.iter().map(|&p| p > 0).collect();

    for n in 0..grid.rbs() {
        let mut best: Option<(f64, f64, usize)> = None;
        for k in (0..clients.len()).filter(|&k| active[k]) {
            let Some(gain) = rb_utility(k, n, &alloc, grid, table, &sizes[k], &prio[k]) else {
                continue;
            };
            let head = prio[k].first().copied().unwrap_or(0.0);
            let wins = match best {
                None => true,
                Some((bg, bh, _)) => gain > bg || (gain == bg && head > bh),
            };
            if wins {
                best = Some((gain, head, k));
            }
        }
        if let Some((_, _, k)) = best {
            alloc.assign(k, n, grid, table, 0);
            if alloc.capacity[k] as u64 >= pending[k] {
                active[k] = false;
            }
        }
    }
    alloc
}
