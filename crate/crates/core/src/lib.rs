//! Deterministic simulator of video delivery over a simplified LTE cell.
//!
//! The crate models one eNodeB serving `K` video clients. Each TTI the
//! simulator steps a Markov CQI process, moves video packets from the
//! server queue through an importance-driven drop stage into per-client
//! TCP senders, schedules downlink resource blocks for the resulting MAC
//! queues, carries ACKs back over a scheduled uplink, and advances client
//! playback.
//!
//! Module map:
//!
//! - [`video`]: packet traces and per-packet importance.
//! - [`apd`]: drop budget and the minimum-importance covering knapsack.
//! - [`tcp`]: NewReno-style sender state used by the schedulers.
//! - [`channel`]: CQI process and the CQI/MCS/capacity tables.
//! - [`mac`]: TCP-aware downlink and ACK-urgency-aware uplink allocation.
//! - [`baselines`]: RR, MAXCI, PF and MLWDF reference schedulers.
//! - [`sim`]: scenario configuration, the per-TTI engine and metrics.

pub mod apd;
pub mod baselines;
pub mod channel;
mod error;
pub mod mac;
pub mod sim;
pub mod tcp;
pub mod video;

pub use error::{Error, Result};

/// Seconds per TTI. All schedulers and the engine run on a 1 ms grid.
pub const TTI_SECONDS: f64 = 0.001;
