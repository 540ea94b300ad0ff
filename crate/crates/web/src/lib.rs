//! wasm-bindgen entry points for `www/index.html`. Every function returns
//! a JSON string so the page needs no generated typings.

use crosslayer::apd::{drop_budget, ApdConfig, QueueSnapshot};
use crosslayer::baselines::maxci_allocate;
use crosslayer::channel::{ChannelProfile, CqiProcess, Link, McsTable};
use crosslayer::mac::downlink::td_allocate;
use crosslayer::mac::Allocation;
use crosslayer::sim::{run, SimConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const COMBOS: [(&str, &str, bool); 6] = [
    ("tu", "td", true),
    ("tu", "td", false),
    ("tu", "maxci", false),
    ("pf", "pf", false),
    ("mlwdf", "mlwdf", false),
    ("rr", "rr", false),
];

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Short runs of one preset under each scheduler combination.
#[wasm_bindgen]
pub fn compare_schedulers(preset: &str, seed: u64, seconds: f64) -> String {
    let base = match SimConfig::preset(preset) {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    if !(seconds > 0.0 && seconds <= 60.0) {
        return error("duration must be within (0, 60] seconds");
    }
    let mut rows = Vec::new();
    for (ul, dl, apd) in COMBOS {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.ul_sched = ul.into();
        cfg.dl_sched = dl.into();
        cfg.apd.enabled = apd;
        cfg.duration_ttis = (seconds * 1000.0).round() as u64;
        match run(&cfg) {
            Ok(r) => rows.push(json!({
                "combo": cfg.combo_label(),
                "system_kbps": r.system_kbps,
                "rebuffer_s": r.rebuffer_s,
                "rebuffer_events": r.rebuffer_events,
                "mean_qr": r.mean_qr,
            })),
            Err(e) => return error(e),
        }
    }
    Value::Array(rows).to_string()
}

fn allocation_json(a: &Allocation) -> Value {
    json!({
        "owner": a.owner,
        "mcs": a.mcs,
        "capacity": a.capacity,
        "satisfied": a.satisfied,
    })
}

/// One TTI of TD next to MAXCI on a random grid. Every client asks for
/// `requirement` bytes and has `queue` bytes waiting.
#[wasm_bindgen]
pub fn td_allocation(clients: usize, rbs: usize, seed: u64, requirement: f64, queue: u64) -> String {
    if !(1..=20).contains(&clients) || !(1..=50).contains(&rbs) {
        return error("clients must be 1-20 and RBs 1-50");
    }
    let means: Vec<f64> = (0..clients).map(|k| 3.0 + (k % 5) as f64).collect();
    let profile = ChannelProfile {
        means,
        p_stay: 0.9,
        spread: 3.0,
    };
    if let Err(e) = profile.validate("channel") {
        return error(e);
    }
    let table = McsTable::standard();
    let grid = CqiProcess::new(profile, rbs, seed, Link::Downlink).current().clone();
    let reqs = vec![requirement.max(0.0); clients];
    let queues = vec![queue; clients];
    let td = td_allocate(&grid, &reqs, &queues, &table);
    let mc = maxci_allocate(&grid, &queues, &table);
    let rows: Vec<&[u8]> = (0..clients).map(|k| grid.row(k)).collect();
    let served = |a: &Allocation| -> u64 { a.capacity.iter().map(|&c| (c as u64).min(queue)).sum() };
    json!({
        "grid": rows,
        "td": allocation_json(&td),
        "maxci": allocation_json(&mc),
        "td_bytes": served(&td),
        "maxci_bytes": served(&mc),
    })
    .to_string()
}

/// APD drop budget against guard time for one client's queue state.
#[wasm_bindgen]
pub fn drop_budget_curve(rate_kbps: f64, playable_s: f64, video_kb: f64, in_flight_kb: f64) -> String {
    if ![rate_kbps, playable_s, video_kb, in_flight_kb].iter().all(|v| v.is_finite() && *v >= 0.0) {
        return error("inputs must be non-negative numbers");
    }
    let snap = QueueSnapshot {
        mac_bytes: 0,
        send_bytes: (in_flight_kb * 1000.0) as u64,
        video_bytes: (video_kb * 1000.0) as u64,
        playable_s,
        recent_rates: Vec::new(),
    };
    let rate = rate_kbps * 1000.0 / 8.0;
    let points: Vec<Value> = (0..=12)
        .map(|i| {
            let guard = i as f64 * 0.25;
            let cfg = ApdConfig {
                guard_time: guard,
                ..ApdConfig::default()
            };
            let (keep, bytes) = drop_budget(rate, &snap, &cfg);
            json!({
                "guard_s": guard,
                "drop_bytes": bytes,
                "keep_fraction": if keep.is_finite() { keep.min(1.0) } else { 1.0 },
            })
        })
        .collect();
    Value::Array(points).to_string()
}
