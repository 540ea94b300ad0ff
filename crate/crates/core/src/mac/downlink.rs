//! TCP-state-aware downlink allocation (TD).
//!
//! Each client's per-TTI capacity requirement is derived from how fast its
//! ACKs come back: the ACK feedback rate scales up to the data rate the
//! sender can sustain, plus protocol headers. Allocation then runs in two
//! greedy phases: first cover every requirement, then hand the remaining
//! RBs to the strongest channels until queues are drained.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Allocation;
use crate::channel::{CqiGrid, McsTable};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// ACK size in bytes.
    pub ack_size: u32,
    /// TCP payload per packet.
    pub payload: u32,
    pub tcp_header: u32,
    pub ip_header: u32,
    pub pdcp_header: u32,
    pub rlc_header: u32,
    pub mac_header: u32,
    pub tti: f64,
    /// TTIs of per-client mean CQI history.
    pub cqi_window: usize,
    /// ACK samples kept for the feedback rate.
    pub ack_window: usize,
    /// Packets of sub-packet-count history.
    pub subpacket_window: usize,
    /// TTIs during which the cold-start requirement is used.
    pub cold_start_ttis: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            ack_size: 40,
            payload: 1460,
            tcp_header: 20,
            ip_header: 20,
            pdcp_header: 2,
            rlc_header: 2,
            mac_header: 2,
            tti: crate::TTI_SECONDS,
            cqi_window: 100,
            ack_window: 16,
            subpacket_window: 16,
            cold_start_ttis: 100,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("protocol.ack_size", self.ack_size),
            ("protocol.payload", self.payload),
            ("protocol.tcp_header", self.tcp_header),
            ("protocol.ip_header", self.ip_header),
            ("protocol.pdcp_header", self.pdcp_header),
            ("protocol.rlc_header", self.rlc_header),
            ("protocol.mac_header", self.mac_header),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.ack_size >= self.payload {
            return Err(Error::config("protocol.ack_size", "must be smaller than the payload"));
        }
        if !(self.tti > 0.0) {
            return Err(Error::config("protocol.tti", "must be positive"));
        }
        for (key, v) in [
            ("protocol.cqi_window", self.cqi_window),
            ("protocol.ack_window", self.ack_window),
            ("protocol.subpacket_window", self.subpacket_window),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// ACK-to-data size ratio.
    pub fn alpha(&self) -> f64 {
        self.ack_size as f64 / self.payload as f64
    }

    /// Packet bytes handed to RLC: payload plus TCP, IP and PDCP headers.
    pub fn pdu_bytes(&self, payload: u32) -> u32 {
        payload + self.tcp_header + self.ip_header + self.pdcp_header
    }

    /// Per-sub-packet overhead added by RLC and MAC.
    pub fn subpacket_overhead(&self) -> u32 {
        self.rlc_header + self.mac_header
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AckSample {
    /// When the packet's last sub-packet left the base station.
    pub st: f64,
    /// When its ACK reached the sender.
    pub re: f64,
}

/// Mean of `A / (Re - St)` over the samples; `None` without samples.
pub fn ack_feedback_rate(samples: &[AckSample], ack_size: u32) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let sum: f64 = samples
        .iter()
        .map(|s| ack_size as f64 / (s.re - s.st).max(f64::MIN_POSITIVE))
        .sum();
    Some(sum / samples.len() as f64)
}

/// Bytes per TTI a client needs so its sender is never starved by the MAC.
pub fn capacity_requirement(rate: f64, proto: &ProtocolConfig, subpackets: u32) -> f64 {
    let data_rate = rate / proto.alpha();
    let packet = proto.pdu_bytes(proto.payload) as f64;
    let mac_rate = data_rate
        * (packet + subpackets.max(1) as f64 * proto.subpacket_overhead() as f64)
        / proto.payload as f64;
    mac_rate * proto.tti
}

/// Expected sub-packets per TCP packet now that the client's channel has
/// moved from `history_cqi` on average to `current_cqi`.
pub fn estimate_subpackets(mean_subpackets: f64, history_cqi: f64, current_cqi: f64) -> u32 {
    let scaled = mean_subpackets * history_cqi / current_cqi.max(1.0);
    (scaled.round() as u32).max(1)
}

/// Per-client rolling state behind the requirement estimate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RequirementTracker {
    samples: VecDeque<AckSample>,
    subpackets: VecDeque<u32>,
    cqi_history: VecDeque<f64>,
}

impl RequirementTracker {
    pub fn record_ack(&mut self, sample: AckSample, proto: &ProtocolConfig) {
        if self.samples.len() == proto.ack_window {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn record_subpackets(&mut self, count: u32, proto: &ProtocolConfig) {
        if self.subpackets.len() == proto.subpacket_window {
            self.subpackets.pop_front();
        }
        self.subpackets.push_back(count.max(1));
    }

    pub fn record_cqi(&mut self, mean_cqi: f64, proto: &ProtocolConfig) {
        if self.cqi_history.len() == proto.cqi_window {
            self.cqi_history.pop_front();
        }
        self.cqi_history.push_back(mean_cqi);
    }

    pub fn samples(&self) -> impl Iterator<Item = &AckSample> {
        self.samples.iter()
    }

    pub fn subpacket_estimate(&self, current_cqi: f64) -> u32 {
        if self.subpackets.is_empty() {
            return 1;
        }
        let mean = self.subpackets.iter().sum::<u32>() as f64 / self.subpackets.len() as f64;
        let history = if self.cqi_history.is_empty() {
            current_cqi
        } else {
            self.cqi_history.iter().sum::<f64>() / self.cqi_history.len() as f64
        };
        estimate_subpackets(mean, history, current_cqi)
    }

    /// Requirement for this TTI. Before any ACK has been timed, and during
    /// the first `cold_start_ttis`, a full packet per TTI is requested.
    pub fn requirement(&self, tti: u64, current_cqi: f64, proto: &ProtocolConfig) -> f64 {
        let samples: Vec<AckSample> = self.samples.iter().copied().collect();
        match ack_feedback_rate(&samples, proto.ack_size) {
            Some(rate) if tti >= proto.cold_start_ttis => {
                capacity_requirement(rate, proto, self.subpacket_estimate(current_cqi))
            }
            _ => (proto.pdu_bytes(proto.payload) + proto.subpacket_overhead()) as f64,
        }
    }
}

fn best_pair(
    grid: &CqiGrid,
    alloc: &Allocation,
    clients: impl Iterator<Item = usize> + Clone,
) -> Option<(usize, usize)> {
    let mut best: Option<(u8, usize, usize)> = None;
    for n in 0..grid.rbs() {
        if alloc.owner[n].is_some() {
            continue;
        }
        for k in clients.clone() {
            let c = grid.get(k, n);
            // Strictly greater keeps the lowest client, then lowest RB.
            let wins = match best {
                None => true,
                Some((bc, bk, bn)) => c > bc || (c == bc && (k, n) < (bk, bn)),
            };
            if wins {
                best = Some((c, k, n));
            }
        }
    }
    best.map(|(_, k, n)| (k, n))
}

/// Two-phase greedy allocation. `requirements[k]` is bytes per TTI needed
/// (clamped to the queue), `queues[k]` the bytes waiting at the MAC.
pub fn td_allocate(grid: &CqiGrid, requirements: &[f64], queues: &[u64], table: &McsTable) -> Allocation {
    let (k_count, n_count) = (grid.clients(), grid.rbs());
    assert_eq!(requirements.len(), k_count);
    assert_eq!(queues.len(), k_count);
    let mut alloc = Allocation::empty(k_count, n_count);
    let need: Vec<f64> = (0..k_count)
        .map(|k| requirements[k].max(0.0).min(queues[k] as f64))
        .collect();

    // Phase 1: satisfy requirements, strongest (client, RB) pair first.
    let mut pending: Vec<bool> = (0..k_count).map(|k| need[k] > 0.0).collect();
    for k in 0..k_count {
        alloc.satisfied[k] = !pending[k];
    }
    while let Some((k, n)) = best_pair(grid, &alloc, (0..k_count).filter(|&k| pending[k])) {
        alloc.assign(k, n, grid, table, 1);
        if alloc.capacity[k] as f64 >= need[k] {
            pending[k] = false;
            alloc.satisfied[k] = true;
        }
    }

    // Phase 2: satisfied clients absorb the rest until their queues are
    // covered. A move gives one client its m strongest free RBs; the move
    // adding the most deliverable bytes per RB wins (a weak RB drags the
    // shared MCS down, so one RB at a time would miss wide low-MCS grants).
    // Ties: larger gain, fewer RBs, lower client. Moves adding nothing are
    // never made.
    let mut active: Vec<bool> = (0..k_count)
        .map(|k| alloc.satisfied[k] && (alloc.capacity[k] as u64) < queues[k])
        .collect();
    loop {
        let mut best: Option<(f64, u64, usize, usize)> = None;
        let mut best_rbs = Vec::new();
        for k in (0..k_count).filter(|&k| active[k]) {
            let mut free: Vec<usize> = (0..n_count).filter(|&n| alloc.owner[n].is_none()).collect();
            free.sort_by_key(|&n| (std::cmp::Reverse(grid.get(k, n)), n));
            let now = (alloc.capacity[k] as u64).min(queues[k]);
            let held = alloc.rbs[k].len();
            let mut min_cqi = alloc.min_cqi(k);
            for (i, &n) in free.iter().enumerate() {
                let m = i + 1;
                min_cqi = min_cqi.min(grid.get(k, n));
                let after = (table.capacity_of(held + m, min_cqi) as u64).min(queues[k]);
                let gain = after.saturating_sub(now);
                let per_rb = gain as f64 / m as f64;
                let wins = gain > 0
                    && match best {
                        None => true,
                        Some((bp, bg, bm, _)) => {
                            per_rb > bp || (per_rb == bp && (gain > bg || (gain == bg && m < bm)))
                        }
                    };
                if wins {
                    best = Some((per_rb, gain, m, k));
                    best_rbs = free[..m].to_vec();
                }
                if after >= queues[k] {
                    break;
                }
            }
        }
        let Some((_, _, _, k)) = best else { break };
        for n in best_rbs {
            alloc.assign(k, n, grid, table, 2);
        }
        if alloc.capacity[k] as u64 >= queues[k] {
            active[k] = false;
        }
    }
    alloc
}
