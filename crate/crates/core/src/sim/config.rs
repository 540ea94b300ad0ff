//! Scenario configuration (TOML) and the built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apd::ApdConfig;
use crate::channel::ChannelProfile;
use crate::mac::downlink::ProtocolConfig;
use crate::mac::uplink::UplinkConfig;
use crate::mac::SchedulerKind;
use crate::tcp::TcpConfig;
use crate::video::STANDARD_SEQUENCES;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub name: String,
    pub seed: u64,
    pub clients: usize,
    pub dl_rbs: usize,
    pub ul_rbs: usize,
    /// Upper bound on simulated TTIs; the run also stops once every client
    /// has played its whole sequence.
    pub duration_ttis: u64,
    /// One-way air plus stack latency, both directions.
    pub latency_ttis: u64,
    pub dl_sched: String,
    pub ul_sched: String,
    /// Drop-tail limit on each client's downlink MAC queue.
    pub mac_buffer_bytes: u64,
    /// Segments that must be complete before playback starts.
    pub startup_segments: usize,
    /// Next segment is requested only while fewer than this many segments
    /// of complete video are waiting to be played.
    pub max_buffered_segments: usize,
    /// Period of metric rows and TCP trace rows.
    pub sample_ttis: u64,
    /// Sequence per client: a standard sequence name (`news.cif`) or a trace file
    /// path, resolved relative to the config file.
    pub sequences: Vec<String>,
    pub dl_channel: ChannelProfile,
    pub ul_channel: ChannelProfile,
    pub apd: ApdConfig,
    pub tcp: TcpConfig,
    pub protocol: ProtocolConfig,
    pub uplink: UplinkConfig,
}

/// Client order of the 8-client scenario.
pub fn standard_sequence_names() -> Vec<String> {
    STANDARD_SEQUENCES.iter().map(|(n, _)| n.to_string()).collect()
}

const DEFAULT_DL_MEANS: [f64; 8] = [6.5, 5.5, 7.5, 4.5, 3.5, 5.5, 2.5, 4.5];
const DEFAULT_UL_MEANS: [f64; 8] = DEFAULT_DL_MEANS;
const POOR_DL_MEANS: [f64; 8] = [4.5, 3.5, 4.5, 3.5, 4.5, 3.5, 4.5, 3.5];
const POOR_UL_MEANS: [f64; 8] = POOR_DL_MEANS;

fn cycle(values: &[f64], n: usize) -> Vec<f64> {
    values.iter().copied().cycle().take(n).collect()
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            name: "paper_8c_16rb".into(),
            seed: 1,
            clients: 8,
            dl_rbs: 16,
            ul_rbs: 8,
            duration_ttis: 60_000,
            latency_ttis: 4,
            dl_sched: "td".into(),
            ul_sched: "tu".into(),
            mac_buffer_bytes: 64 * 1024,
            startup_segments: 1,
            max_buffered_segments: 2,
            sample_ttis: 50,
            sequences: standard_sequence_names(),
            dl_channel: ChannelProfile {
                means: DEFAULT_DL_MEANS.to_vec(),
                p_stay: 0.9,
                spread: 3.0,
            },
            ul_channel: ChannelProfile {
                means: DEFAULT_UL_MEANS.to_vec(),
                p_stay: 0.9,
                spread: 3.0,
            },
            apd: ApdConfig::default(),
            tcp: TcpConfig::default(),
            protocol: ProtocolConfig::default(),
            uplink: UplinkConfig::default(),
        }
    }
}

pub const PRESETS: [&str; 2] = ["paper_8c_16rb", "poor_channel_8c"];

impl SimConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper_8c_16rb" => Ok(Self::default()),
            "poor_channel_8c" => {
                let seqs = ["news.cif", "highway.cif", "crew.cif", "foreman.cif"];
                Ok(Self {
                    name: name.into(),
                    sequences: seqs.iter().chain(seqs.iter()).map(|s| s.to_string()).collect(),
                    dl_channel: ChannelProfile {
                        means: POOR_DL_MEANS.to_vec(),
                        p_stay: 0.9,
                        spread: 3.0,
                    },
                    ul_channel: ChannelProfile {
                        means: POOR_UL_MEANS.to_vec(),
                        p_stay: 0.9,
                        spread: 3.0,
                    },
                    ..Self::default()
                })
            }
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")),
            )),
        }
    }

    /// Same scenario with `k` clients; sequences and channel means cycle.
    pub fn with_clients(mut self, k: usize) -> Self {
        let base = self.sequences.clone();
        self.sequences = base.iter().cycle().take(k).cloned().collect();
        self.dl_channel.means = cycle(&self.dl_channel.means, k);
        self.ul_channel.means = cycle(&self.ul_channel.means, k);
        self.clients = k;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(key, e.to_string().trim_end().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dl_kind(&self) -> Result<SchedulerKind> {
        let kind: SchedulerKind = self
            .dl_sched
            .parse()
            .map_err(|_| Error::config("dl_sched", format!("unknown scheduler `{}`", self.dl_sched)))?;
        if !kind.usable_on_downlink() {
            return Err(Error::config("dl_sched", format!("`{kind}` is an uplink-only scheduler")));
        }
        Ok(kind)
    }

    pub fn ul_kind(&self) -> Result<SchedulerKind> {
        let kind: SchedulerKind = self
            .ul_sched
            .parse()
            .map_err(|_| Error::config("ul_sched", format!("unknown scheduler `{}`", self.ul_sched)))?;
        if !kind.usable_on_uplink() {
            return Err(Error::config("ul_sched", format!("`{kind}` is a downlink-only scheduler")));
        }
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        self.dl_kind()?;
        self.ul_kind()?;
        let positive = [
            ("clients", self.clients as u64),
            ("dl_rbs", self.dl_rbs as u64),
            ("ul_rbs", self.ul_rbs as u64),
            ("latency_ttis", self.latency_ttis),
            ("startup_segments", self.startup_segments as u64),
            ("max_buffered_segments", self.max_buffered_segments as u64),
            ("sample_ttis", self.sample_ttis),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.startup_segments > self.max_buffered_segments {
            return Err(Error::config(
                "startup_segments",
                "cannot exceed max_buffered_segments (playback would never start)",
            ));
        }
        let mtu = self.protocol.pdu_bytes(self.protocol.payload) as u64;
        if self.mac_buffer_bytes < mtu {
            return Err(Error::config(
                "mac_buffer_bytes",
                format!("must hold at least one packet ({mtu} B)"),
            ));
        }
        if self.sequences.len() != self.clients {
            return Err(Error::config(
                "sequences",
                format!("{} entries for {} clients", self.sequences.len(), self.clients),
            ));
        }
        for (key, ch) in [("dl_channel", &self.dl_channel), ("ul_channel", &self.ul_channel)] {
            ch.validate(key)?;
            if ch.means.len() != self.clients {
                return Err(Error::config(
                    format!("{key}.means"),
                    format!("{} entries for {} clients", ch.means.len(), self.clients),
                ));
            }
        }
        self.apd.validate()?;
        self.tcp.validate()?;
        self.protocol.validate()?;
        self.uplink.validate()?;
        if self.protocol.payload != self.tcp.mss {
            return Err(Error::config("protocol.payload", "must equal tcp.mss"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Label like `APD_TU_TD` or `PF_RR` (uplink first).
    pub fn combo_label(&self) -> String {
        let ul = self.ul_sched.to_uppercase();
        let dl = self.dl_sched.to_uppercase();
        if self.apd.enabled {
            format!("APD_{ul}_{dl}")
        } else {
            format!("{ul}_{dl}")
        }
    }

    /// Resolve a sequence entry: a known name, or a path relative to `base`.
    pub fn sequence_source(&self, k: usize, base: Option<&Path>) -> SequenceSource {
        let entry = &self.sequences[k];
        if STANDARD_SEQUENCES.iter().any(|(n, _)| n == entry) {
            SequenceSource::Named(entry.clone())
        } else {
            let p = PathBuf::from(entry);
            SequenceSource::File(match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SequenceSource {
    Named(String),
    File(PathBuf),
}

/// Reference PSNR at full quality. The four values known for the poor
/// channel scenario are used as given; the rest are placeholders.
pub fn base_psnr(sequence: &str) -> f64 {
    match sequence.trim_end_matches(".cif") {
        "news" => 38.97,
        "highway" => 38.50,
        "crew" => 37.49,
        "foreman" => 37.03,
        _ => 37.5,
    }
}
