//! Reference schedulers: round robin, max CQI, proportional fair and
//! M-LWDF. They run unchanged on the downlink (MAC byte queues) and the
//! uplink (ACK byte queues).
//!
//! A client drops out of contention once its capacity covers its queue, so
//! no scheduler hands out RBs that could carry nothing.

use crate::channel::{CqiGrid, McsTable};
use crate::mac::Allocation;

fn wants_more(alloc: &Allocation, k: usize, queues: &[u64]) -> bool {
    queues[k] > 0 && (alloc.capacity[k] as u64) < queues[k]
}

/// Round robin with a cursor that persists across TTIs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundRobin {
    cursor: usize,
}

impl RoundRobin {
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn allocate(&mut self, grid: &CqiGrid, queues: &[u64], table: &McsTable) -> Allocation {
        let k_count = grid.clients();
        let mut alloc = Allocation::empty(k_count, grid.rbs());
        if k_count == 0 {
            return alloc;
        }
        let mut next = self.cursor % k_count;
        for n in 0..grid.rbs() {
            let Some(k) = (0..k_count)
                .map(|i| (next + i) % k_count)
                .find(|&k| wants_more(&alloc, k, queues))
            else {
                break;
            };
            alloc.assign(k, n, grid, table, 0);
            next = (k + 1) % k_count;
            self.cursor = next;
        }
        alloc
    }
}

/// Each RB to the highest-CQI client with data; ties to the lowest index.
pub fn maxci_allocate(grid: &CqiGrid, queues: &[u64], table: &McsTable) -> Allocation {
    let mut alloc = Allocation::empty(grid.clients(), grid.rbs());
    for n in 0..grid.rbs() {
        let mut best: Option<(u8, usize)> = None;
        for k in 0..grid.clients() {
            if !wants_more(&alloc, k, queues) {
                continue;
            }
            let c = grid.get(k, n);
            if best.is_none_or(|(bc, _)| c > bc) {
                best = Some((c, k));
            }
        }
        if let Some((_, k)) = best {
            alloc.assign(k, n, grid, table, 0);
        }
    }
    alloc
}

/// Exponentially averaged served rate per client, in bytes/s.
#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputAverage {
    ema: Vec<f64>,
    horizon: f64,
    floor: f64,
}

impl ThroughputAverage {
    pub const DEFAULT_HORIZON_TTIS: f64 = 1000.0;
    pub const FLOOR_BYTES_PER_S: f64 = 1.0;

    pub fn new(clients: usize) -> Self {
        Self {
            ema: vec![0.0; clients],
            horizon: Self::DEFAULT_HORIZON_TTIS,
            floor: Self::FLOOR_BYTES_PER_S,
        }
    }

    pub fn with_values(values: Vec<f64>) -> Self {
        Self {
            ema: values,
            ..Self::new(0)
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        self.ema[k].max(self.floor)
    }

    /// Fold in the bytes each client actually moved this TTI.
    pub fn update(&mut self, served_bytes: &[u64], tti: f64) {
        let w = 1.0 / self.horizon;
        for (e, &b) in self.ema.iter_mut().zip(served_bytes) {
            *e = (1.0 - w) * *e + w * b as f64 / tti;
        }
    }
}

/// Generic per-RB argmax on `(metric, cqi)`, ties to the lowest client.
fn metric_allocate(
    grid: &CqiGrid,
    queues: &[u64],
    table: &McsTable,
    metric: impl Fn(usize, usize) -> f64,
) -> Allocation {
    let mut alloc = Allocation::empty(grid.clients(), grid.rbs());
    for n in 0..grid.rbs() {
        let mut best: Option<(f64, u8, usize)> = None;
        for k in 0..grid.clients() {
            if !wants_more(&alloc, k, queues) {
                continue;
            }
            let (m, c) = (metric(k, n), grid.get(k, n));
            if best.is_none_or(|(bm, bc, _)| m > bm || (m == bm && c > bc)) {
                best = Some((m, c, k));
            }
        }
        if let Some((_, _, k)) = best {
            alloc.assign(k, n, grid, table, 0);
        }
    }
    alloc
}

/// Proportional fair: instantaneous RB rate over the averaged served rate.
pub fn pf_allocate(grid: &CqiGrid, queues: &[u64], avg: &ThroughputAverage, table: &McsTable) -> Allocation {
    metric_allocate(grid, queues, table, |k, n| {
        table.cqi_rate(grid.get(k, n)) as f64 / crate::TTI_SECONDS / avg.get(k)
    })
}

pub const MLWDF_DROP_PROBABILITY: f64 = 0.05;
pub const MLWDF_DELAY_TARGET_S: f64 = 0.5;

/// M-LWDF: proportional fair weighted by head-of-line delay.
pub fn mlwdf_allocate(
    grid: &CqiGrid,
    queues: &[u64],
    hol_delays: &[f64],
    avg: &ThroughputAverage,
    table: &McsTable,
) -> Allocation {
    let a = -MLWDF_DROP_PROBABILITY.ln() / MLWDF_DELAY_TARGET_S;
    metric_allocate(grid, queues, table, |k, n| {
        a * hol_delays[k] * table.cqi_rate(grid.get(k, n)) as f64 / crate::TTI_SECONDS / avg.get(k)
    })
}
