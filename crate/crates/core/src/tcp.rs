//! NewReno-style TCP sender and a cumulative-ACK receiver.
//!
//! Sequence numbers count payload bytes. The sender keeps a ledger of
//! unacknowledged segments with their send times; the uplink scheduler reads
//! those times to compute ACK deadlines.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MSS: u32 = 1460;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcpConfig {
    pub mss: u32,
    pub initial_window_mss: u32,
    pub initial_ssthresh: u32,
    pub rto_init: f64,
    pub rto_min: f64,
    pub rto_max: f64,
    /// Slow start grows cwnd by at most this many MSS per ACK.
    pub abc_limit_mss: u32,
}

impl Default for TcpConfig {
    fn default() -> Self {
        Self {
            mss: MSS,
            initial_window_mss: 2,
            initial_ssthresh: 65_535,
            rto_init: 0.5,
            rto_min: 0.2,
            rto_max: 4.0,
            abc_limit_mss: 2,
        }
    }
}

impl TcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mss == 0 {
            return Err(Error::config("tcp.mss", "must be positive"));
        }
        if self.initial_window_mss == 0 {
            return Err(Error::config("tcp.initial_window_mss", "must be at least 1"));
        }
        if self.initial_ssthresh < 2 * self.mss {
            return Err(Error::config("tcp.initial_ssthresh", "must be at least 2 MSS"));
        }
        if !(self.rto_min > 0.0 && self.rto_min <= self.rto_max) {
            return Err(Error::config("tcp.rto_min", "need 0 < rto_min <= rto_max"));
        }
        if !(self.rto_init >= self.rto_min && self.rto_init <= self.rto_max) {
            return Err(Error::config("tcp.rto_init", "must lie within [rto_min, rto_max]"));
        }
        if self.abc_limit_mss == 0 {
            return Err(Error::config("tcp.abc_limit_mss", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TcpMode {
    SlowStart,
    CongestionAvoidance,
    Recovery,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SentSegment {
    pub seq: u64,
    pub size: u32,
    pub send_time: f64,
    pub retransmitted: bool,
}

impl SentSegment {
    pub fn end(&self) -> u64 {
        self.seq + self.size as u64
    }
}

/// What the sender wants on the wire next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub seq: u64,
    pub size: u32,
    pub retransmission: bool,
}

/// Read-only view handed to the schedulers.
#[derive(Clone, Debug, PartialEq)]
pub struct TcpSnapshot {
    pub cwnd: f64,
    pub ssthresh: f64,
    pub rto: f64,
    pub send_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcpFlow {
    cfg: TcpConfig,
    cwnd: f64,
    ssthresh: f64,
    srtt: Option<f64>,
    rttvar: f64,
    rto: f64,
    mode: TcpMode,
    snd_una: u64,
    snd_nxt: u64,
    ledger: VecDeque<SentSegment>,
    /// Segments pulled back after a timeout, resent in order before new data.
    go_back: VecDeque<(u64, u32)>,
    /// Ledger head to resend immediately after the third duplicate ACK.
    fast_resend: Option<u64>,
    recover: u64,
    dup_acks: u32,
    timer: Option<f64>,
    pub timeouts: u64,
    pub fast_retransmits: u64,
    pub retransmitted_bytes: u64,
}

impl TcpFlow {
    pub fn new(cfg: TcpConfig) -> Self {
        Self {
            cwnd: (cfg.initial_window_mss * cfg.mss) as f64,
            ssthresh: cfg.initial_ssthresh as f64,
            srtt: None,
            rttvar: 0.0,
            rto: cfg.rto_init,
            mode: TcpMode::SlowStart,
            snd_una: 0,
            snd_nxt: 0,
            ledger: VecDeque::new(),
            go_back: VecDeque::new(),
            fast_resend: None,
            recover: 0,
            dup_acks: 0,
            timer: None,
            timeouts: 0,
            fast_retransmits: 0,
            retransmitted_bytes: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }
    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }
    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }
    pub fn rto(&self) -> f64 {
        self.rto
    }
    pub fn srtt(&self) -> Option<f64> {
        self.srtt
    }
    pub fn mode(&self) -> TcpMode {
        self.mode
    }
    pub fn dup_acks(&self) -> u32 {
        self.dup_acks
    }
    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }
    /// Highest sequence number ever sent.
    pub fn snd_max(&self) -> u64 {
        self.snd_nxt
    }
    pub fn ledger(&self) -> &VecDeque<SentSegment> {
        &self.ledger
    }
    pub fn timer_deadline(&self) -> Option<f64> {
        self.timer
    }

    pub fn bytes_in_flight(&self) -> u64 {
        self.ledger.iter().map(|s| s.size as u64).sum()
    }

    /// Bytes sent at least once but waiting to be sent again.
    pub fn pending_retransmit_bytes(&self) -> u64 {
        let fast = self
            .fast_resend
            .and_then(|seq| self.ledger.iter().find(|s| s.seq == seq))
            .map_or(0, |s| s.size as u64);
        self.go_back.iter().map(|&(_, n)| n as u64).sum::<u64>() + fast
    }

    pub fn can_send(&self) -> u64 {
        (self.cwnd - self.bytes_in_flight() as f64).max(0.0) as u64
    }

    pub fn has_retransmission(&self) -> bool {
        self.fast_resend.is_some() || !self.go_back.is_empty()
    }

    /// Next retransmission allowed now, if any. A fast retransmit ignores
    /// the window; go-back segments wait for room.
    pub fn take_retransmission(&mut self, now: f64) -> Option<Transmission> {
        if let Some(seq) = self.fast_resend.take() {
            if let Some(seg) = self.ledger.iter_mut().find(|s| s.seq == seq) {
                seg.send_time = now;
                seg.retransmitted = true;
                self.retransmitted_bytes += seg.size as u64;
                self.timer.get_or_insert(now + self.rto);
                return Some(Transmission {
                    seq,
                    size: seg.size,
                    retransmission: true,
                });
            }
        }
        if self.go_back.is_empty() || self.can_send() == 0 {
            return None;
        }
        let (seq, size) = self.go_back.pop_front().unwrap();
        self.push_ledger(seq, size, now, true);
        self.retransmitted_bytes += size as u64;
        Some(Transmission {
            seq,
            size,
            retransmission: true,
        })
    }

    /// Send a new segment of `size` bytes. The caller checks `can_send`
    /// and that no retransmission is pending.
    pub fn send_new(&mut self, size: u32, now: f64) -> Transmission {
        assert!(size > 0 && size <= self.cfg.mss, "segment size {size} outside 1..=MSS");
        debug_assert!(self.go_back.is_empty());
        let seq = self.snd_nxt;
        self.snd_nxt += size as u64;
        self.push_ledger(seq, size, now, false);
        Transmission {
            seq,
            size,
            retransmission: false,
        }
    }

    fn push_ledger(&mut self, seq: u64, size: u32, now: f64, retransmitted: bool) {
        debug_assert!(self.ledger.back().is_none_or(|s| s.seq < seq));
        self.ledger.push_back(SentSegment {
            seq,
            size,
            send_time: now,
            retransmitted,
        });
        self.timer.get_or_insert(now + self.rto);
    }

    fn mss(&self) -> f64 {
        self.cfg.mss as f64
    }

    fn halve(&mut self) {
        let flight = self.bytes_in_flight() as f64;
        self.ssthresh = (flight / 2.0).max(2.0 * self.mss());
    }

    fn update_rtt(&mut self, sample: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(sample);
                self.rttvar = sample / 2.0;
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - sample).abs();
                self.srtt = Some(0.875 * srtt + 0.125 * sample);
            }
        }
        self.rto = (self.srtt.unwrap() + 4.0 * self.rttvar).clamp(self.cfg.rto_min, self.cfg.rto_max);
    }

    /// Process a cumulative ACK naming the next byte the receiver expects.
    pub fn on_ack(&mut self, ack: u64, now: f64) {
        if ack > self.snd_nxt {
            return;
        }
        if ack <= self.snd_una {
            if ack == self.snd_una && !self.ledger.is_empty() {
                self.on_duplicate();
            }
            return;
        }

        let acked = ack - self.snd_una;
        self.snd_una = ack;
        let mut sample = None;
        while let Some(head) = self.ledger.front() {
            if head.end() > ack {
                break;
            }
            let seg = self.ledger.pop_front().unwrap();
            if !seg.retransmitted {
                sample = Some(now - seg.send_time);
            }
        }
        // An ACK landing inside a segment: keep the unacked tail only.
        if let Some(head) = self.ledger.front_mut() {
            if head.seq < ack {
                head.size = (head.end() - ack) as u32;
                head.seq = ack;
            }
        }
        self.go_back.retain(|&(seq, size)| seq + size as u64 > ack);
        if let Some(&mut (ref mut seq, ref mut size)) = self.go_back.front_mut() {
            if *seq < ack {
                *size = (*seq + *size as u64 - ack) as u32;
                *seq = ack;
            }
        }
        if self.fast_resend.is_some_and(|s| s < ack) {
            self.fast_resend = None;
        }
        if let Some(r) = sample {
            self.update_rtt(r);
        }
        self.dup_acks = 0;

        match self.mode {
            TcpMode::Recovery => {
                if ack >= self.recover {
                    self.cwnd = self.ssthresh;
                    self.mode = TcpMode::CongestionAvoidance;
                } else if let Some(head) = self.ledger.front() {
                    // Partial ACK: the next hole is lost too.
                    self.fast_resend = Some(head.seq);
                }
            }
            TcpMode::SlowStart => {
                let limit = (self.cfg.abc_limit_mss * self.cfg.mss) as f64;
                self.cwnd += (acked as f64).min(limit);
                if self.cwnd >= self.ssthresh {
                    self.mode = TcpMode::CongestionAvoidance;
                }
            }
            TcpMode::CongestionAvoidance => {
                self.cwnd += self.mss() * acked as f64 / self.cwnd;
            }
        }

        self.timer = if self.ledger.is_empty() {
            None
        } else {
            Some(now + self.rto)
        };
    }

    fn on_duplicate(&mut self) {
        self.dup_acks += 1;
        if self.dup_acks == 3 && self.mode != TcpMode::Recovery && self.snd_una >= self.recover {
            self.halve();
            self.cwnd = self.ssthresh;
            self.mode = TcpMode::Recovery;
            self.recover = self.snd_nxt;
            self.fast_resend = self.ledger.front().map(|s| s.seq);
            self.fast_retransmits += 1;
        }
    }

    /// True once the retransmission timer has run out.
    pub fn timer_expired(&self, now: f64) -> bool {
        self.timer.is_some_and(|t| now >= t - 1e-12)
    }

    /// Retransmission timeout: collapse the window and resend everything
    /// outstanding, oldest first.
    pub fn on_timeout(&mut self, _now: f64) {
        if self.ledger.is_empty() {
            return;
        }
        self.halve();
        self.cwnd = self.mss();
        self.mode = TcpMode::SlowStart;
        self.rto = (self.rto * 2.0).min(self.cfg.rto_max);
        self.dup_acks = 0;
        self.fast_resend = None;
        self.recover = self.snd_nxt;
        for seg in self.ledger.drain(..).rev() {
            self.go_back.push_front((seg.seq, seg.size));
        }
        self.timer = None;
        self.timeouts += 1;
    }

    pub fn extract_state(&self) -> TcpSnapshot {
        TcpSnapshot {
            cwnd: self.cwnd,
            ssthresh: self.ssthresh,
            rto: self.rto,
            send_times: self.ledger.iter().map(|s| s.send_time).collect(),
        }
    }

    /// Send time of the newest transmission covering byte `seq - 1`, i.e.
    /// the segment an ACK for `seq` answers.
    pub fn send_time_for_ack(&self, ack: u64) -> Option<f64> {
        self.ledger.iter().find(|s| s.end() == ack).map(|s| s.send_time)
    }
}

/// Cumulative-ACK receiver with an out-of-order buffer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    out_of_order: BTreeMap<u64, u32>,
}

impl TcpReceiver {
    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn buffered_bytes(&self) -> u64 {
        self.out_of_order.values().map(|&n| n as u64).sum()
    }

    /// Accept a segment; returns the ACK to send and the segments that just
    /// became contiguous, in order.
    pub fn on_segment(&mut self, seq: u64, size: u32) -> (u64, Vec<(u64, u32)>) {
        let mut released = Vec::new();
        let end = seq + size as u64;
        if end > self.rcv_nxt {
            if seq <= self.rcv_nxt {
                // Segments never straddle an old boundary in this simulator,
                // but a partial overlap is still handled by trimming.
                released.push((seq, size));
                self.rcv_nxt = end;
                while let Some((&s, &n)) = self.out_of_order.first_key_value() {
                    if s > self.rcv_nxt {
                        break;
                    }
                    self.out_of_order.pop_first();
                    if s + n as u64 > self.rcv_nxt {
                        released.push((s, n));
                        self.rcv_nxt = s + n as u64;
                    }
                }
            } else {
                self.out_of_order.entry(seq).or_insert(size);
            }
        }
        (self.rcv_nxt, released)
    }
}
