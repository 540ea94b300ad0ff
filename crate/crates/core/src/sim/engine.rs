//! The per-TTI loop tying video queues, APD, TCP, the MAC schedulers and
//! client playback together.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rand::Rng;

use super::config::{base_psnr, SequenceSource, SimConfig};
use super::metrics::{estimate_psnr, ClientReport, MetricRow, MetricsReport, TcpTracePoint};
use super::session::{Playback, PlaybackState};
use crate::apd::{apply_apd, ApdLedger, QueueSnapshot};
use crate::baselines::{maxci_allocate, mlwdf_allocate, pf_allocate, RoundRobin, ThroughputAverage};
use crate::channel::{stream_rng, CqiGrid, CqiProcess, Link, McsTable};
use crate::mac::downlink::{td_allocate, AckSample, RequirementTracker};
use crate::mac::uplink::{playback_weight, tu_allocate, PendingAck, UplinkClient};
use crate::mac::{Allocation, SchedulerKind};
use crate::tcp::{TcpFlow, TcpReceiver, Transmission};

use crate::video::{generate_trace, load_trace, SequenceProfile};
use crate::video::{VideoPacket, VideoSequence};
use crate::{Result, TTI_SECONDS};

/// Build every client's trace. Named sequences are synthesized from a
/// per-client seed; other entries are loaded from disk.
pub fn build_traces(cfg: &SimConfig, base: Option<&Path>) -> Result<Vec<VideoSequence>> {
    (0..cfg.clients)
        .map(|k| match cfg.sequence_source(k, base) {
            SequenceSource::Named(name) => {
                let seed = cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(k as u64);
                generate_trace(seed, &SequenceProfile::named(&name)?)
            }
            SequenceSource::File(path) => load_trace(path),
        })
        .collect()
}

/// Run a validated config to completion.
pub fn run(cfg: &SimConfig) -> Result<MetricsReport> {
    Ok(run_full(cfg, None, false)?.report)
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub metrics: Vec<MetricRow>,
    /// `dl tti client n_rbs mcs bytes` and `ul tti client n_rbs acks bytes`.
    pub allocations: Vec<String>,
}

pub fn run_full(cfg: &SimConfig, base: Option<&Path>, record_allocations: bool) -> Result<RunOutput> {
    cfg.validate()?;
    let traces = build_traces(cfg, base)?;
    let mut sim = Simulation::new(cfg.clone(), traces)?;
    sim.record_allocations = record_allocations;
    while !sim.done() {
        sim.step();
    }
    Ok(RunOutput {
        report: sim.report(),
        metrics: std::mem::take(&mut sim.rows),
        allocations: std::mem::take(&mut sim.allocations),
    })
}

#[derive(Clone, Debug)]
struct MacPdu {
    seq: u64,
    payload: u32,
    /// MAC bytes not yet sent, excluding sub-packet headers.
    left: u32,
    pieces: u32,
    sent: f64,
    enqueued: f64,
}

#[derive(Clone, Debug)]
struct DataInFlight {
    arrive: u64,
    seq: u64,
    size: u32,
    sent: f64,
    departed: f64,
}

#[derive(Clone, Debug)]
struct QueuedAck {
    ack: u64,
    left: u32,
    sent: f64,
    departed: f64,
    created: f64,
}

#[derive(Clone, Debug)]
struct AckInFlight {
    arrive: u64,
    ack: u64,
    departed: f64,
}

#[derive(Clone, Debug)]
struct Client {
    name: String,
    trace: VideoSequence,
    frames_per_segment: usize,
    next_segment: usize,
    request_arrival: Option<u64>,
    first_request: Option<f64>,
    video_queue: VecDeque<VideoPacket>,
    seq_frame: BTreeMap<u64, usize>,
    tcp: TcpFlow,
    rx: TcpReceiver,
    mac: VecDeque<MacPdu>,
    mac_bytes: u64,
    dl_flight: VecDeque<DataInFlight>,
    ul: VecDeque<QueuedAck>,
    ul_bytes: u64,
    ul_flight: VecDeque<AckInFlight>,
    req: RequirementTracker,
    playback: Playback,
    apd: ApdLedger,
    apd_due: bool,
    rate_samples: VecDeque<f64>,
    window_bytes: u64,
    window_busy: u64,
    generated: u64,
    delivered: u64,
    mac_drops: u64,
    last_delivery: Option<f64>,
    stalls_seen: usize,
}

impl Client {
    fn new(trace: VideoSequence, cfg: &SimConfig) -> Self {
        let fps = trace.frames_per_segment as usize;
        let mss = cfg.tcp.mss;
        let mut frame_pieces = vec![0u32; trace.segments.len() * fps];
        for p in trace.packets() {
            frame_pieces[global_frame(p, fps)] += p.size.div_ceil(mss);
        }
        let playback = Playback::new(frame_pieces, trace.frame_rate, cfg.startup_segments * fps);
        Self {
            name: trace.name.clone(),
            frames_per_segment: fps,
            trace,
            next_segment: 0,
            request_arrival: None,
            first_request: None,
            video_queue: VecDeque::new(),
            seq_frame: BTreeMap::new(),
            tcp: TcpFlow::new(cfg.tcp.clone()),
            rx: TcpReceiver::default(),
            mac: VecDeque::new(),
            mac_bytes: 0,
            dl_flight: VecDeque::new(),
            ul: VecDeque::new(),
            ul_bytes: 0,
            ul_flight: VecDeque::new(),
            req: RequirementTracker::default(),
            playback,
            apd: ApdLedger::default(),
            apd_due: false,
            rate_samples: VecDeque::new(),
            window_bytes: 0,
            window_busy: 0,
            generated: 0,
            delivered: 0,
            mac_drops: 0,
            last_delivery: None,
            stalls_seen: 0,
        }
    }

    fn segments(&self) -> usize {
        self.trace.segments.len()
    }

    fn queue_bytes(&self) -> u64 {
        self.video_queue.iter().map(|p| p.size as u64).sum()
    }

    fn all_resolved(&self) -> bool {
        self.playback.complete_frames() == self.playback.total_frames()
    }
}

fn global_frame(p: &VideoPacket, frames_per_segment: usize) -> usize {
    (p.segment as usize - 1) * frames_per_segment + (p.frame as usize - 1)
}

/// One scenario in progress. `step` advances one TTI.
#[derive(Clone, Debug)]
pub struct Simulation {
    cfg: SimConfig,
    dl_kind: SchedulerKind,
    ul_kind: SchedulerKind,
    table: McsTable,
    dl_channel: CqiProcess,
    ul_channel: CqiProcess,
    clients: Vec<Client>,
    rr_dl: RoundRobin,
    rr_ul: RoundRobin,
    avg_dl: ThroughputAverage,
    avg_ul: ThroughputAverage,
    tti: u64,
    phantom: u64,
    pub record_allocations: bool,
    rows: Vec<MetricRow>,
    allocations: Vec<String>,
    trace: Vec<TcpTracePoint>,
    /// Optional random loss on the downlink air interface.
    loss_rng: rand_chacha::ChaCha8Rng,
    pub loss_probability: f64,
}

impl Simulation {
    pub fn new(cfg: SimConfig, traces: Vec<VideoSequence>) -> Result<Self> {
        cfg.validate()?;
        assert_eq!(traces.len(), cfg.clients, "one trace per client");
        let dl_kind = cfg.dl_kind()?;
        let ul_kind = cfg.ul_kind()?;
        let dl_channel = CqiProcess::new(cfg.dl_channel.clone(), cfg.dl_rbs, cfg.seed, Link::Downlink);
        let ul_channel = CqiProcess::new(cfg.ul_channel.clone(), cfg.ul_rbs, cfg.seed, Link::Uplink);
        let clients = traces.into_iter().map(|t| Client::new(t, &cfg)).collect();
        Ok(Self {
            dl_kind,
            ul_kind,
            table: McsTable::standard(),
            dl_channel,
            ul_channel,
            clients,
            rr_dl: RoundRobin::default(),
            rr_ul: RoundRobin::default(),
            avg_dl: ThroughputAverage::new(cfg.clients),
            avg_ul: ThroughputAverage::new(cfg.clients),
            tti: 0,
            phantom: 0,
            record_allocations: false,
            rows: Vec::new(),
            allocations: Vec::new(),
            trace: Vec::new(),
            loss_rng: stream_rng(cfg.seed, 9, 0, 0),
            loss_probability: 0.0,
            cfg,
        })
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn done(&self) -> bool {
        self.tti >= self.cfg.duration_ttis
            || self.clients.iter().all(|c| c.playback.state() == PlaybackState::Finished)
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    fn row(&mut self, metric: &'static str, client: usize, value: f64) {
        self.rows.push(MetricRow {
            metric,
            tti: self.tti,
            client,
            value,
        });
    }

    pub fn step(&mut self) {
        let now = self.tti as f64 * TTI_SECONDS;
        let dl_grid = self.dl_channel.step().clone();
        let ul_grid = self.ul_channel.step().clone();
        for (k, c) in self.clients.iter_mut().enumerate() {
            c.req.record_cqi(dl_grid.row_mean(k), &self.cfg.protocol);
        }

        self.segment_requests(now);
        if self.cfg.apd.enabled {
            self.run_apd();
        }
        for k in 0..self.clients.len() {
            self.package(k, now);
        }
        self.downlink(&dl_grid, now);
        self.deliver_data(now);
        self.uplink(&ul_grid, now);
        self.deliver_acks(now);

        for k in 0..self.clients.len() {
            let c = &mut self.clients[k];
            if c.tcp.timer_expired(now) {
                c.tcp.on_timeout(now);
                self.row("timeout", k, 1.0);
            }
        }

        let end = now + TTI_SECONDS;
        for k in 0..self.clients.len() {
            let c = &mut self.clients[k];
            c.playback.advance(end, TTI_SECONDS);
            let stalls = c.playback.stalls.clone();
            let seen = c.stalls_seen;
            c.stalls_seen = stalls.len();
            for s in &stalls[seen..] {
                self.row("rebuffer_start", k, s.start);
            }
        }

        self.sample();
        self.tti += 1;
    }

    fn segment_requests(&mut self, now: f64) {
        let latency = self.cfg.latency_ttis;
        let max_buffer = self.cfg.max_buffered_segments;
        let tti = self.tti;
        let mut events = Vec::new();
        for (k, c) in self.clients.iter_mut().enumerate() {
            if c.request_arrival.is_some_and(|t| t <= tti) {
                c.request_arrival = None;
                let seg = &c.trace.segments[c.next_segment - 1];
                c.generated += seg.iter().map(|p| p.size as u64).sum::<u64>();
                c.video_queue.extend(seg.iter().cloned());
                c.apd_due = true;
            }
            let previous_done = c.playback.complete_frames() >= c.next_segment * c.frames_per_segment;
            let room = c.playback.buffered_seconds() < max_buffer as f64 * c.trace.segment_duration() - 1e-9;
            if c.request_arrival.is_none() && c.next_segment < c.segments() && previous_done && room {
                c.request_arrival = Some(tti + latency);
                c.next_segment += 1;
                c.first_request.get_or_insert(now);
                events.push((k, c.next_segment as f64));
            }
        }
        for (k, s) in events {
            self.row("segment_request", k, s);
        }
    }

    fn run_apd(&mut self) {
        let cadence = self.tti > 0 && self.tti % self.cfg.apd.cadence_ttis == 0;
        let mss = self.cfg.tcp.mss;
        let mut events = Vec::new();
        for (k, c) in self.clients.iter_mut().enumerate() {
            if !(c.apd_due || cadence) || c.video_queue.is_empty() {
                continue;
            }
            c.apd_due = false;
            let snap = QueueSnapshot {
                mac_bytes: c.mac_bytes,
                send_bytes: c.tcp.pending_retransmit_bytes(),
                video_bytes: 0,
                playable_s: c.playback.buffered_seconds(),
                recent_rates: c.rate_samples.iter().copied().collect(),
            };
            let before: Vec<(usize, u32)> = c
                .video_queue
                .iter()
                .map(|p| (global_frame(p, c.frames_per_segment), p.size))
                .collect();
            let plan = apply_apd(&mut c.video_queue, &snap, &self.cfg.apd, &mut c.apd);
            for (&(frame, size), _) in before.iter().zip(&plan.set.flags).filter(|(_, &f)| f) {
                for _ in 0..size.div_ceil(mss) {
                    c.playback.packet_resolved(frame);
                }
            }
            if plan.set.dropped_bytes > 0 {
                events.push((k, plan.set.dropped_bytes as f64));
            }
        }
        for (k, b) in events {
            self.row("apd_drop_bytes", k, b);
        }
    }

    fn enqueue_mac(&mut self, k: usize, tx: Transmission, now: f64) {
        let pdu = self.cfg.protocol.pdu_bytes(tx.size);
        let limit = self.cfg.mac_buffer_bytes;
        let c = &mut self.clients[k];
        if c.mac_bytes + pdu as u64 > limit {
            c.mac_drops += 1;
            return;
        }
        c.mac_bytes += pdu as u64;
        c.mac.push_back(MacPdu {
            seq: tx.seq,
            payload: tx.size,
            left: pdu,
            pieces: 0,
            sent: now,
            enqueued: now,
        });
    }

    fn package(&mut self, k: usize, now: f64) {
        let mss = self.cfg.tcp.mss;
        let fps = self.clients[k].frames_per_segment;
        loop {
            let c = &mut self.clients[k];
            if let Some(tx) = c.tcp.take_retransmission(now) {
                self.enqueue_mac(k, tx, now);
                continue;
            }
            if c.tcp.has_retransmission() || c.tcp.can_send() == 0 {
                break;
            }
            let Some(p) = c.video_queue.pop_front() else { break };
            let frame = global_frame(&p, fps);
            let mut left = p.size;
            while left > 0 {
                let c = &mut self.clients[k];
                let size = left.min(mss);
                left -= size;
                let tx = c.tcp.send_new(size, now);
                c.seq_frame.insert(tx.seq, frame);
                self.enqueue_mac(k, tx, now);
            }
        }
    }

    fn downlink(&mut self, grid: &CqiGrid, now: f64) {
        let overhead = self.cfg.protocol.subpacket_overhead() as u64;
        let queues: Vec<u64> = self
            .clients
            .iter()
            .map(|c| c.mac_bytes + overhead * c.mac.len() as u64)
            .collect();
        let alloc = match self.dl_kind {
            SchedulerKind::Td => {
                let reqs: Vec<f64> = self
                    .clients
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c.req.requirement(self.tti, grid.row_mean(k), &self.cfg.protocol))
                    .collect();
                td_allocate(grid, &reqs, &queues, &self.table)
            }
            SchedulerKind::Rr => self.rr_dl.allocate(grid, &queues, &self.table),
            SchedulerKind::Maxci => maxci_allocate(grid, &queues, &self.table),
            SchedulerKind::Pf => pf_allocate(grid, &queues, &self.avg_dl, &self.table),
            SchedulerKind::Mlwdf => {
                let hol: Vec<f64> = self
                    .clients
                    .iter()
                    .map(|c| c.mac.front().map_or(0.0, |p| now - p.enqueued))
                    .collect();
                mlwdf_allocate(grid, &queues, &hol, &self.avg_dl, &self.table)
            }
            SchedulerKind::Tu => unreachable!("validated"),
        };
        let latency = self.cfg.latency_ttis;
        let mut served = vec![0u64; self.clients.len()];
        for (k, c) in self.clients.iter_mut().enumerate() {
            if !c.mac.is_empty() {
                c.window_busy += 1;
            }
            let mut room = alloc.capacity[k] as u64;
            while room > overhead {
                let Some(head) = c.mac.front_mut() else { break };
                let take = (head.left as u64).min(room - overhead);
                head.left -= take as u32;
                head.pieces += 1;
                room -= take + overhead;
                served[k] += take + overhead;
                c.mac_bytes -= take;
                if head.left == 0 {
                    let pdu = c.mac.pop_front().unwrap();
                    c.req.record_subpackets(pdu.pieces, &self.cfg.protocol);
                    let lost = self.loss_probability > 0.0 && self.loss_rng.random::<f64>() < self.loss_probability;
                    if !lost {
                        c.dl_flight.push_back(DataInFlight {
                            arrive: self.tti + latency,
                            seq: pdu.seq,
                            size: pdu.payload,
                            sent: pdu.sent,
                            departed: now,
                        });
                    }
                }
            }
            if served[k] > alloc.capacity[k] as u64 {
                self.phantom += 1;
            }
        }
        self.avg_dl.update(&served, TTI_SECONDS);
        if self.record_allocations {
            self.log_allocation("dl", &alloc, &served);
        }
    }

    fn log_allocation(&mut self, link: &str, alloc: &Allocation, served: &[u64]) {
        for k in 0..alloc.clients() {
            if alloc.rbs[k].is_empty() {
                continue;
            }
            let mcs = alloc.mcs[k].map_or(0, |m| m);
            self.allocations
                .push(format!("{link} {} {k} {} {mcs} {}", self.tti, alloc.rbs[k].len(), served[k]));
        }
    }

    fn deliver_data(&mut self, now: f64) {
        let ack_size = self.cfg.protocol.ack_size;
        let tti = self.tti;
        for c in &mut self.clients {
            while c.dl_flight.front().is_some_and(|d| d.arrive <= tti) {
                let d = c.dl_flight.pop_front().unwrap();
                c.window_bytes += d.size as u64;
                let (ack, released) = c.rx.on_segment(d.seq, d.size);
                for (seq, size) in released {
                    if let Some(frame) = c.seq_frame.remove(&seq) {
                        c.playback.packet_resolved(frame);
                    }
                    c.delivered += size as u64;
                    c.last_delivery = Some(now);
                }
                c.ul.push_back(QueuedAck {
                    ack,
                    left: ack_size,
                    sent: d.sent,
                    departed: d.departed,
                    created: now,
                });
                c.ul_bytes += ack_size as u64;
            }
        }
    }

    fn uplink(&mut self, grid: &CqiGrid, now: f64) {
        let queues: Vec<u64> = self.clients.iter().map(|c| c.ul_bytes).collect();
        let alloc = match self.ul_kind {
            SchedulerKind::Tu => {
                let total: usize = self.clients.iter().map(|c| c.playback.rebuffer_events()).sum();
                let k_count = self.clients.len();
                let views: Vec<UplinkClient> = self
                    .clients
                    .iter()
                    .map(|c| UplinkClient {
                        acks: c
                            .ul
                            .iter()
                            .map(|a| PendingAck {
                                size: a.left,
                                sent: a.sent,
                            })
                            .collect(),
                        cwnd: c.tcp.cwnd(),
                        ssthresh: c.tcp.ssthresh(),
                        rto: c.tcp.rto(),
                        urgency_share: playback_weight(c.playback.rebuffer_events() as u64, total as u64, k_count),
                    })
                    .collect();
                tu_allocate(grid, &views, now, &self.table, &self.cfg.uplink)
            }
            SchedulerKind::Rr => self.rr_ul.allocate(grid, &queues, &self.table),
            SchedulerKind::Maxci => maxci_allocate(grid, &queues, &self.table),
            SchedulerKind::Pf => pf_allocate(grid, &queues, &self.avg_ul, &self.table),
            SchedulerKind::Mlwdf => {
                let hol: Vec<f64> = self
                    .clients
                    .iter()
                    .map(|c| c.ul.front().map_or(0.0, |a| now - a.created))
                    .collect();
                mlwdf_allocate(grid, &queues, &hol, &self.avg_ul, &self.table)
            }
            SchedulerKind::Td => unreachable!("validated"),
        };
        let latency = self.cfg.latency_ttis;
        let mut served = vec![0u64; self.clients.len()];
        for (k, c) in self.clients.iter_mut().enumerate() {
            let mut room = alloc.capacity[k] as u64;
            while room > 0 {
                let Some(head) = c.ul.front_mut() else { break };
                let take = (head.left as u64).min(room);
                head.left -= take as u32;
                room -= take;
                served[k] += take;
                c.ul_bytes -= take;
                if head.left == 0 {
                    let a = c.ul.pop_front().unwrap();
                    c.ul_flight.push_back(AckInFlight {
                        arrive: self.tti + latency,
                        ack: a.ack,
                        departed: a.departed,
                    });
                }
            }
        }
        self.avg_ul.update(&served, TTI_SECONDS);
        if self.record_allocations {
            self.log_allocation("ul", &alloc, &served);
        }
    }

    fn deliver_acks(&mut self, now: f64) {
        let tti = self.tti;
        for c in &mut self.clients {
            while c.ul_flight.front().is_some_and(|a| a.arrive <= tti) {
                let a = c.ul_flight.pop_front().unwrap();
                c.tcp.on_ack(a.ack, now);
                c.req.record_ack(
                    AckSample {
                        st: a.departed,
                        re: now,
                    },
                    &self.cfg.protocol,
                );
            }
        }
    }

    fn sample(&mut self) {
        let window = self.cfg.apd.sample_ttis;
        if (self.tti + 1) % window == 0 {
            let keep = self.cfg.apd.history_window;
            for c in &mut self.clients {
                // Rate while backlogged; idle windows say nothing about the link.
                if c.window_busy * 2 >= window && c.window_bytes > 0 {
                    if c.rate_samples.len() == keep {
                        c.rate_samples.pop_front();
                    }
                    c.rate_samples
                        .push_back(c.window_bytes as f64 / (c.window_busy as f64 * TTI_SECONDS));
                }
                c.window_bytes = 0;
                c.window_busy = 0;
            }
        }
        if self.tti % self.cfg.sample_ttis == 0 {
            for k in 0..self.clients.len() {
                let c = &self.clients[k];
                let (cwnd, ssthresh) = (c.tcp.cwnd(), c.tcp.ssthresh());
                let vals = [
                    ("buffer_s", c.playback.buffered_seconds()),
                    ("mac_bytes", c.mac_bytes as f64),
                    ("delivered_bytes", c.delivered as f64),
                ];
                self.trace.push(TcpTracePoint {
                    tti: self.tti,
                    client: k,
                    cwnd,
                    ssthresh,
                });
                self.row("cwnd", k, cwnd);
                self.row("ssthresh", k, ssthresh);
                for (m, v) in vals {
                    self.row(m, k, v);
                }
            }
        }
    }

    pub fn report(&self) -> MetricsReport {
        let end = self.tti as f64 * TTI_SECONDS;
        let clients: Vec<ClientReport> = self
            .clients
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let complete = c.all_resolved() && c.first_request.is_some();
                let completion = if complete { c.last_delivery } else { None };
                let active = c.first_request.map_or(0.0, |t0| completion.unwrap_or(end) - t0);
                let throughput = if active > 0.0 {
                    c.delivered as f64 * 8.0 / 1000.0 / active
                } else {
                    0.0
                };
                let total_u = c.trace.total_importance();
                let qr = if total_u > 0.0 {
                    (1.0 - c.apd.dropped_importance / total_u).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let base = base_psnr(&c.name);
                let queued = c.queue_bytes() + (c.tcp.snd_max() - c.delivered);
                ClientReport {
                    client: k,
                    sequence: c.name.clone(),
                    throughput_kbps: throughput,
                    delivered_bytes: c.delivered,
                    generated_bytes: c.generated,
                    apd_dropped_bytes: c.apd.dropped_bytes,
                    apd_dropped_packets: c.apd.dropped_packets,
                    apd_runs: c.apd.runs,
                    queued_bytes: queued,
                    mac_dropped_packets: c.mac_drops,
                    startup_delay_s: c.playback.startup_time.zip(c.first_request).map(|(s, r)| s - r),
                    rebuffer_events: c.playback.rebuffer_events(),
                    rebuffer_s: c.playback.rebuffer_time,
                    finished: c.playback.state() == PlaybackState::Finished,
                    completion_s: completion,
                    quality_retention: qr,
                    base_psnr_db: base,
                    psnr_db: estimate_psnr(base, qr),
                    timeouts: c.tcp.timeouts,
                    fast_retransmits: c.tcp.fast_retransmits,
                    retransmitted_bytes: c.tcp.retransmitted_bytes,
                }
            })
            .collect();
        let conservation_ok = self.clients.iter().all(|c| {
            c.delivered == c.rx.rcv_nxt()
                && c.generated == c.apd.dropped_bytes + c.tcp.snd_max() + c.queue_bytes()
        });
        let n = clients.len().max(1) as f64;
        MetricsReport {
            name: self.cfg.name.clone(),
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
            dl_sched: self.dl_kind.name().to_string(),
            ul_sched: self.ul_kind.name().to_string(),
            apd: self.cfg.apd.enabled,
            ttis: self.tti,
            system_kbps: clients.iter().map(|c| c.throughput_kbps).sum(),
            rebuffer_events: clients.iter().map(|c| c.rebuffer_events).sum(),
            rebuffer_s: clients.iter().map(|c| c.rebuffer_s).sum(),
            mean_qr: clients.iter().map(|c| c.quality_retention).sum::<f64>() / n,
            mean_psnr_db: clients.iter().map(|c| c.psnr_db).sum::<f64>() / n,
            conservation_ok,
            phantom_deliveries: self.phantom,
            clients,
            tcp_trace: self.trace.clone(),
        }
    }
}
