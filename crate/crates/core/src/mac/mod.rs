//! Per-TTI resource block allocation.
//!
//! Every scheduler, TCP-aware or baseline, produces an [`Allocation`]: RB
//! owners plus the single MCS each owning client uses across its RBs.

pub mod downlink;
pub mod uplink;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{CqiGrid, McsTable};
use crate::Error;

/// One RB grant, in the order the scheduler made it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grant {
    pub client: usize,
    pub rb: usize,
    /// Algorithm phase that made the grant (1 or 2 for TD, 0 otherwise).
    pub phase: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    /// Owner of each RB.
    pub owner: Vec<Option<usize>>,
    /// RBs held by each client, in grant order.
    pub rbs: Vec<Vec<usize>>,
    /// Shared MCS of each client holding at least one RB.
    pub mcs: Vec<Option<usize>>,
    /// Bytes per TTI each client can send with its RBs.
    pub capacity: Vec<u32>,
    /// Clients whose requirement was met (TD only).
    pub satisfied: Vec<bool>,
    pub grants: Vec<Grant>,
    min_cqi: Vec<u8>,
}

impl Allocation {
    pub fn empty(clients: usize, rbs: usize) -> Self {
        Self {
            owner: vec![None; rbs],
            rbs: vec![Vec::new(); clients],
            mcs: vec![None; clients],
            capacity: vec![0; clients],
            satisfied: vec![false; clients],
            grants: Vec::new(),
            min_cqi: vec![u8::MAX; clients],
        }
    }

    pub fn clients(&self) -> usize {
        self.rbs.len()
    }

    /// Weakest CQI among the client's RBs (`u8::MAX` when it holds none).
    pub fn min_cqi(&self, client: usize) -> u8 {
        self.min_cqi[client]
    }

    /// Capacity `client` would have after also taking `rb`.
    pub fn capacity_with(&self, client: usize, rb: usize, grid: &CqiGrid, table: &McsTable) -> u32 {
        let min = self.min_cqi[client].min(grid.get(client, rb));
        table.capacity_of(self.rbs[client].len() + 1, min)
    }

    pub fn assign(&mut self, client: usize, rb: usize, grid: &CqiGrid, table: &McsTable, phase: u8) {
        assert!(self.owner[rb].is_none(), "RB {rb} assigned twice");
        self.owner[rb] = Some(client);
        self.rbs[client].push(rb);
        self.min_cqi[client] = self.min_cqi[client].min(grid.get(client, rb));
        self.mcs[client] = Some(table.mcs_for_cqi(self.min_cqi[client]));
        self.capacity[client] = table.capacity_of(self.rbs[client].len(), self.min_cqi[client]);
        self.grants.push(Grant { client, rb, phase });
    }

    pub fn assigned_rbs(&self) -> usize {
        self.owner.iter().filter(|o| o.is_some()).count()
    }

    pub fn total_capacity(&self) -> u64 {
        self.capacity.iter().map(|&c| c as u64).sum()
    }

    /// Check ownership and MCS consistency against `grid`, recomputing
    /// everything from the owner vector.
    pub fn verify(&self, grid: &CqiGrid, table: &McsTable) -> Result<(), String> {
        if self.owner.len() != grid.rbs() || self.rbs.len() != grid.clients() {
            return Err("allocation shape does not match grid".into());
        }
        let mut held = vec![Vec::new(); grid.clients()];
        for (rb, owner) in self.owner.iter().enumerate() {
            if let Some(k) = *owner {
                if k >= grid.clients() {
                    return Err(format!("RB {rb} owned by unknown client {k}"));
                }
                held[k].push(rb);
            }
        }
        for k in 0..grid.clients() {
            let mut listed = self.rbs[k].clone();
            listed.sort_unstable();
            if listed != held[k] {
                return Err(format!("client {k}: RB list disagrees with owners"));
            }
            let expect_mcs = table.max_mcs(held[k].iter().map(|&n| grid.get(k, n))).ok();
            if self.mcs[k] != expect_mcs {
                return Err(format!("client {k}: MCS {:?}, expected {:?}", self.mcs[k], expect_mcs));
            }
            let expect_cap = table.set_capacity(held[k].iter().map(|&n| grid.get(k, n)));
            if self.capacity[k] != expect_cap {
                return Err(format!("client {k}: capacity {} expected {}", self.capacity[k], expect_cap));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Td,
    Tu,
    Pf,
    Rr,
    Maxci,
    Mlwdf,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 6] = [
        SchedulerKind::Td,
        SchedulerKind::Tu,
        SchedulerKind::Pf,
        SchedulerKind::Rr,
        SchedulerKind::Maxci,
        SchedulerKind::Mlwdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Td => "td",
            SchedulerKind::Tu => "tu",
            SchedulerKind::Pf => "pf",
            SchedulerKind::Rr => "rr",
            SchedulerKind::Maxci => "maxci",
            SchedulerKind::Mlwdf => "mlwdf",
        }
    }

    pub fn usable_on_downlink(self) -> bool {
        self != SchedulerKind::Tu
    }

    pub fn usable_on_uplink(self) -> bool {
        self != SchedulerKind::Td
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheduler `{s}`")))
    }
}
