//! Run reports, metric rows and the quality-to-PSNR mapping.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// PSNR loss per unit of lost importance, relative to the base PSNR.
pub const PSNR_SLOPE: f64 = 0.15;

pub fn estimate_psnr(base_psnr: f64, quality_retention: f64) -> f64 {
    let qr = quality_retention.clamp(0.0, 1.0);
    base_psnr - PSNR_SLOPE * (1.0 - qr) * base_psnr
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientReport {
    pub client: usize,
    pub sequence: String,
    pub throughput_kbps: f64,
    /// Payload bytes delivered in order to the client.
    pub delivered_bytes: u64,
    /// Bytes of every segment the server received a request for.
    pub generated_bytes: u64,
    pub apd_dropped_bytes: u64,
    pub apd_dropped_packets: u64,
    pub apd_runs: u64,
    /// Bytes still queued at the server or unacknowledged at the end.
    pub queued_bytes: u64,
    pub mac_dropped_packets: u64,
    pub startup_delay_s: Option<f64>,
    pub rebuffer_events: usize,
    pub rebuffer_s: f64,
    pub finished: bool,
    /// Time the last byte arrived, if every segment was delivered.
    pub completion_s: Option<f64>,
    pub quality_retention: f64,
    pub base_psnr_db: f64,
    pub psnr_db: f64,
    pub timeouts: u64,
    pub fast_retransmits: u64,
    pub retransmitted_bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TcpTracePoint {
    pub tti: u64,
    pub client: usize,
    pub cwnd: f64,
    pub ssthresh: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub dl_sched: String,
    pub ul_sched: String,
    pub apd: bool,
    pub ttis: u64,
    pub system_kbps: f64,
    pub rebuffer_events: usize,
    pub rebuffer_s: f64,
    pub mean_qr: f64,
    pub mean_psnr_db: f64,
    /// Per-client byte balance held at the end of the run.
    pub conservation_ok: bool,
    /// TTIs in which some client received more than its grant could carry.
    pub phantom_deliveries: u64,
    pub clients: Vec<ClientReport>,
    pub tcp_trace: Vec<TcpTracePoint>,
}

impl MetricsReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{} seed={} {}: system {:.1} kbps, rebuffering {:.3} s ({} events), mean QR {:.4}",
            self.name,
            self.seed,
            combo(self),
            self.system_kbps,
            self.rebuffer_s,
            self.rebuffer_events,
            self.mean_qr
        )
    }

    pub fn tcp_trace_csv(&self) -> String {
        let mut out = String::from("tti,client,cwnd,ssthresh\n");
        for p in &self.tcp_trace {
            let _ = writeln!(out, "{},{},{},{}", p.tti, p.client, p.cwnd, p.ssthresh);
        }
        out
    }
}

fn combo(r: &MetricsReport) -> String {
    let base = format!("{}_{}", r.ul_sched.to_uppercase(), r.dl_sched.to_uppercase());
    if r.apd {
        format!("APD_{base}")
    } else {
        base
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: &'static str,
    pub tti: u64,
    pub client: usize,
    pub value: f64,
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("metric,tti,client,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.metric, r.tti, r.client, r.value);
    }
    out
}
