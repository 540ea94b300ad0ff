//! CQI process and the CQI → MCS → per-RB capacity mapping.
//!
//! Every (client, RB) pair runs its own birth-death chain on CQI 1..=15.
//! Each chain has a private ChaCha stream keyed by the scenario seed, so
//! adding RBs or clients never perturbs the draws of existing pairs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_CQI: u8 = 1;
pub const MAX_CQI: u8 = 15;
pub const MCS_LEVELS: usize = 6;

/// Resource elements per RB per TTI (12 subcarriers x 14 symbols).
const RES_PER_RB: u32 = 168;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McsLevel {
    pub modulation: Modulation,
    /// Turbo code rate as (numerator, denominator).
    pub code_rate: (u32, u32),
    /// Bytes one RB carries in one TTI at this level.
    pub rb_bytes: u32,
}

impl McsLevel {
    fn new(modulation: Modulation, code_rate: (u32, u32)) -> Self {
        let bits = RES_PER_RB * modulation.bits_per_symbol() * code_rate.0;
        Self {
            modulation,
            code_rate,
            rb_bytes: bits / (code_rate.1 * 8),
        }
    }
}

/// Six MCS levels (QPSK/16QAM/64QAM at rate 1/2 and 3/4) and the CQI
/// thresholds that select the highest level a CQI supports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct McsTable {
    levels: [McsLevel; MCS_LEVELS],
    cqi_to_mcs: [usize; MAX_CQI as usize + 1],
}

impl Default for McsTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl McsTable {
    pub fn standard() -> Self {
        use Modulation::*;
        let levels = [
            McsLevel::new(Qpsk, (1, 2)),
            McsLevel::new(Qpsk, (3, 4)),
            McsLevel::new(Qam16, (1, 2)),
            McsLevel::new(Qam16, (3, 4)),
            McsLevel::new(Qam64, (1, 2)),
            McsLevel::new(Qam64, (3, 4)),
        ];
        // Index 0 is unused; CQI 1-2 -> 1, 3-5 -> 2, 6-7 -> 3, 8-10 -> 4,
        // 11-12 -> 5, 13-15 -> 6.
        let cqi_to_mcs = [0, 1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 5, 5, 6, 6, 6];
        Self { levels, cqi_to_mcs }
    }

    pub fn level(&self, mcs: usize) -> Result<&McsLevel> {
        if !(1..=MCS_LEVELS).contains(&mcs) {
            return Err(Error::McsOutOfRange(mcs));
        }
        Ok(&self.levels[mcs - 1])
    }

    /// Bytes per RB per TTI at MCS `mcs` (1-based).
    pub fn rb_capacity(&self, mcs: usize) -> Result<u32> {
        self.level(mcs).map(|l| l.rb_bytes)
    }

    /// Highest MCS a single RB with this CQI supports.
    pub fn mcs_for_cqi(&self, cqi: u8) -> usize {
        self.cqi_to_mcs[cqi.clamp(MIN_CQI, MAX_CQI) as usize]
    }

    /// Per-RB bytes at the MCS this CQI supports on its own.
    pub fn cqi_rate(&self, cqi: u8) -> u32 {
        self.levels[self.mcs_for_cqi(cqi) - 1].rb_bytes
    }

    /// Shared MCS for a set of RBs, gated by the weakest RB.
    pub fn max_mcs<I>(&self, cqis: I) -> Result<usize>
    where
        I: IntoIterator<Item = u8>,
    {
        cqis.into_iter()
            .min()
            .map(|c| self.mcs_for_cqi(c))
            .ok_or(Error::UndefinedMcs)
    }

    /// Capacity of an RB set: RB count times the per-RB bytes of its
    /// shared MCS, zero for an empty set.
    pub fn set_capacity<I>(&self, cqis: I) -> u32
    where
        I: IntoIterator<Item = u8>,
    {
        let mut count = 0u32;
        let mut min = u8::MAX;
        for c in cqis {
            count += 1;
            min = min.min(c);
        }
        if count == 0 {
            return 0;
        }
        count * self.cqi_rate(min)
    }

    /// Capacity of `count` RBs whose weakest CQI is `min_cqi`.
    pub fn capacity_of(&self, count: usize, min_cqi: u8) -> u32 {
        if count == 0 {
            0
        } else {
            count as u32 * self.cqi_rate(min_cqi)
        }
    }
}

/// CQI values of every (client, RB) pair for one TTI.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CqiGrid {
    pub tti: u64,
    clients: usize,
    rbs: usize,
    values: Vec<u8>,
}

impl CqiGrid {
    pub fn new(tti: u64, clients: usize, rbs: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != clients * rbs {
            return Err(Error::InvalidInput(format!(
                "grid needs {} values for {clients}x{rbs}, got {}",
                clients * rbs,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(MIN_CQI..=MAX_CQI).contains(*v)) {
            return Err(Error::InvalidInput(format!("CQI {v} outside 1..=15")));
        }
        Ok(Self {
            tti,
            clients,
            rbs,
            values,
        })
    }

    /// Build from one row per client. Panics on ragged rows or bad CQIs;
    /// intended for fixtures.
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let rbs = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == rbs), "ragged CQI rows");
        let values = rows.concat();
        Self::new(0, rows.len(), rbs, values).expect("valid CQI fixture")
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn rbs(&self) -> usize {
        self.rbs
    }

    pub fn get(&self, client: usize, rb: usize) -> u8 {
        self.values[client * self.rbs + rb]
    }

    pub fn row(&self, client: usize) -> &[u8] {
        &self.values[client * self.rbs..(client + 1) * self.rbs]
    }

    pub fn row_mean(&self, client: usize) -> f64 {
        let row = self.row(client);
        row.iter().map(|&c| c as f64).sum::<f64>() / row.len().max(1) as f64
    }
}

/// Scenario-level description of one link direction's channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    /// Mean CQI per client.
    pub means: Vec<f64>,
    /// Probability a chain keeps its value for one TTI.
    pub p_stay: f64,
    /// Distance from the mean at which the chain is forced back toward it.
    pub spread: f64,
}

impl ChannelProfile {
    pub fn validate(&self, key: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_stay) {
            return Err(Error::config(format!("{key}.p_stay"), "must lie in [0, 1]"));
        }
        if !(self.spread > 0.0) {
            return Err(Error::config(format!("{key}.spread"), "must be positive"));
        }
        if let Some(m) = self
            .means
            .iter()
            .find(|m| !(MIN_CQI as f64..=MAX_CQI as f64).contains(*m))
        {
            return Err(Error::config(
                format!("{key}.means"),
                format!("mean CQI {m} outside [1, 15]"),
            ));
        }
        Ok(())
    }
}

/// Probability of an upward move (given a move happens) from `cqi`.
fn up_share(cqi: u8, mean: f64, spread: f64) -> f64 {
    (0.5 + (mean - cqi as f64) / (2.0 * spread)).clamp(0.0, 1.0)
}

/// One step of the birth-death chain for a uniform draw `r` in [0, 1).
fn transition(cqi: u8, mean: f64, spread: f64, p_stay: f64, r: f64) -> u8 {
    let move_p = 1.0 - p_stay;
    let u = up_share(cqi, mean, spread);
    let p_up = move_p * u;
    let p_down = move_p * (1.0 - u);
    if r < p_up {
        if cqi < MAX_CQI {
            cqi + 1
        } else {
            cqi
        }
    } else if r < p_up + p_down {
        if cqi > MIN_CQI {
            cqi - 1
        } else {
            cqi
        }
    } else {
        cqi
    }
}

/// Exact stationary distribution over CQI 1..=15 (index 0 = CQI 1) of the
/// chain with this mean and spread, from detailed balance.
pub fn stationary_distribution(mean: f64, spread: f64) -> [f64; MAX_CQI as usize] {
    let mut pi = [0.0; MAX_CQI as usize];
    // Start the recursion at the mode so unreachable tails stay zero.
    let start = (mean.round() as i64).clamp(MIN_CQI as i64, MAX_CQI as i64) as usize - 1;
    pi[start] = 1.0;
    for i in start + 1..pi.len() {
        let up = up_share(i as u8, mean, spread);
        let down = 1.0 - up_share(i as u8 + 1, mean, spread);
        pi[i] = if down > 0.0 { pi[i - 1] * up / down } else { 0.0 };
    }
    for i in (0..start).rev() {
        let up = up_share(i as u8 + 1, mean, spread);
        let down = 1.0 - up_share(i as u8 + 2, mean, spread);
        pi[i] = if up > 0.0 { pi[i + 1] * down / up } else { 0.0 };
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    pi
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Link {
    Downlink,
    Uplink,
}

impl Link {
    fn tag(self) -> u64 {
        match self {
            Link::Downlink => 1,
            Link::Uplink => 2,
        }
    }
}

/// Independent ChaCha stream for `(seed, purpose, a, b)`.
pub(crate) fn stream_rng(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | (a << 24) | b);
    rng
}

#[derive(Clone, Debug)]
struct Chain {
    cqi: u8,
    rng: ChaCha8Rng,
}

/// Evolving CQI state for one link direction.
#[derive(Clone, Debug)]
pub struct CqiProcess {
    profile: ChannelProfile,
    rbs: usize,
    chains: Vec<Chain>,
    grid: CqiGrid,
}

impl CqiProcess {
    pub fn new(profile: ChannelProfile, rbs: usize, seed: u64, link: Link) -> Self {
        let clients = profile.means.len();
        let mut chains = Vec::with_capacity(clients * rbs);
        for (k, &mean) in profile.means.iter().enumerate() {
            let pi = stationary_distribution(mean, profile.spread);
            for n in 0..rbs {
                let mut rng = stream_rng(seed, link.tag(), k as u64, n as u64);
                let draw: f64 = rng.random();
                let mut acc = 0.0;
                let mut cqi = MAX_CQI;
                for (i, p) in pi.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        cqi = i as u8 + 1;
                        break;
                    }
                }
                chains.push(Chain { cqi, rng });
            }
        }
        let values = chains.iter().map(|c| c.cqi).collect();
        let grid = CqiGrid {
            tti: 0,
            clients,
            rbs,
            values,
        };
        Self {
            profile,
            rbs,
            chains,
            grid,
        }
    }

    /// Grid of the most recent step (the initial draw before any step).
    pub fn current(&self) -> &CqiGrid {
        &self.grid
    }

    /// Advance every chain by one TTI and return the new grid.
    pub fn step(&mut self) -> &CqiGrid {
        let ChannelProfile {
            means,
            p_stay,
            spread,
        } = &self.profile;
        for (i, chain) in self.chains.iter_mut().enumerate() {
            let mean = means[i / self.rbs];
            let r: f64 = chain.rng.random();
            chain.cqi = transition(chain.cqi, mean, *spread, *p_stay, r);
            self.grid.values[i] = chain.cqi;
        }
        self.grid.tti += 1;
        &self.grid
    }
}
