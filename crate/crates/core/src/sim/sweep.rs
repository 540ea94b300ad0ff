//! Parameter sweeps over clients, downlink RBs and APD guard time.

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::engine::run;
use super::metrics::MetricsReport;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Clients,
    DlRbs,
    GuardTime,
}

impl SweepKind {
    pub const ALL: [SweepKind; 3] = [SweepKind::Clients, SweepKind::DlRbs, SweepKind::GuardTime];

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Clients => "clients",
            SweepKind::DlRbs => "dl_rbs",
            SweepKind::GuardTime => "guard_time",
        }
    }

    pub fn points(self) -> Vec<f64> {
        match self {
            SweepKind::Clients => vec![8.0, 12.0, 16.0, 20.0],
            SweepKind::DlRbs => vec![16.0, 18.0, 20.0, 22.0],
            SweepKind::GuardTime => vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }

    /// Scheduler combos as (uplink, downlink, apd).
    pub fn combos(self) -> Vec<(&'static str, &'static str, bool)> {
        match self {
            SweepKind::GuardTime => vec![("tu", "td", true)],
            _ => vec![
                ("tu", "td", true),
                ("tu", "td", false),
                ("tu", "maxci", false),
                ("pf", "pf", false),
                ("rr", "rr", false),
            ],
        }
    }

    /// Scenario for one point and combo.
    pub fn config(self, point: f64, combo: (&str, &str, bool), seed: u64) -> SimConfig {
        let mut cfg = match self {
            SweepKind::GuardTime => SimConfig::preset("poor_channel_8c").expect("known preset"),
            _ => SimConfig::default(),
        };
        match self {
            SweepKind::Clients => cfg = cfg.with_clients(point as usize),
            SweepKind::DlRbs => cfg.dl_rbs = point as usize,
            SweepKind::GuardTime => cfg.apd.guard_time = point,
        }
        cfg.name = format!("{}_{}", self.name(), point);
        cfg.ul_sched = combo.0.into();
        cfg.dl_sched = combo.1.into();
        cfg.apd.enabled = combo.2;
        cfg.seed = seed;
        cfg
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sweep preset `{s}` (known: clients, dl_rbs, guard_time)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: f64,
    pub dl_sched: String,
    pub ul_sched: String,
    pub apd: bool,
    pub seed: u64,
    pub system_kbps: f64,
    pub rebuffer_s: f64,
    pub mean_qr: f64,
    pub apd_dropped_packets: u64,
    pub config_hash: String,
}

impl SweepRow {
    pub fn from_report(point: f64, r: &MetricsReport) -> Self {
        Self {
            point,
            dl_sched: r.dl_sched.clone(),
            ul_sched: r.ul_sched.clone(),
            apd: r.apd,
            seed: r.seed,
            system_kbps: r.system_kbps,
            rebuffer_s: r.rebuffer_s,
            mean_qr: r.mean_qr,
            apd_dropped_packets: r.clients.iter().map(|c| c.apd_dropped_packets).sum(),
            config_hash: r.config_hash.clone(),
        }
    }
}

pub const SWEEP_CSV_HEADER: &str =
    "point,dl_sched,ul_sched,apd,seed,system_kbps,rebuffer_s,mean_qr,apd_dropped_packets,config_hash";

pub fn sweep_csv_line(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{:.3},{:.4},{:.6},{},{}",
        r.point, r.dl_sched, r.ul_sched, r.apd, r.seed, r.system_kbps, r.rebuffer_s, r.mean_qr, r.apd_dropped_packets, r.config_hash
    )
}

/// Run every (point, combo, seed) of a sweep with seeds `1..=seeds`, in
/// point-major order. `progress` sees each row as it completes.
pub fn run_sweep(kind: SweepKind, seeds: u64, mut progress: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for point in kind.points() {
        for combo in kind.combos() {
            for seed in 1..=seeds {
                let report = run(&kind.config(point, combo, seed))?;
                let row = SweepRow::from_report(point, &report);
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}
