//! Scenario configuration, the per-TTI engine, client playback, metrics and
//! sweeps.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod session;
pub mod sweep;

pub use config::SimConfig;
pub use engine::{run, run_full, RunOutput, Simulation};
pub use metrics::{estimate_psnr, MetricsReport};
pub use sweep::{run_sweep, SweepKind, SweepRow};
