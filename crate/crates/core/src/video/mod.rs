//! Pre-encoded video sequences as packet traces with per-packet importance.

mod importance;
mod io;
mod synth;

pub use importance::{compute_importance, MacroblockStat, MbMode, PacketCoding};
pub use io::{load_trace, parse_trace, save_trace, write_trace};
pub use synth::{generate_trace, SequenceProfile, STANDARD_SEQUENCES};

use serde::{Deserialize, Serialize};

/// Upper bound on the referenced-pixel fraction in synthetic traces.
pub const MAX_REF_FRACTION: f64 = 4.0;

/// One transport payload unit of a video sequence.
///
/// Macroblock detail is consumed when the trace is generated; only the
/// resulting importance is carried (and persisted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoPacket {
    /// 1-based segment index.
    pub segment: u32,
    /// 1-based frame index within the segment.
    pub frame: u32,
    /// 1-based packet index within the frame.
    pub index: u32,
    /// Payload size in bytes.
    pub size: u32,
    /// Fraction of this packet's pixels referenced by later packets.
    pub ref_fraction: f64,
    /// Importance `U`: distortion caused by losing this packet.
    pub importance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSequence {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frame_rate: u32,
    pub frames_per_segment: u32,
    /// `segments[s]` holds segment `s + 1` in transmission order.
    pub segments: Vec<Vec<VideoPacket>>,
}

impl VideoSequence {
    pub fn segment_bytes(&self, segment: usize) -> u64 {
        self.segments[segment].iter().map(|p| p.size as u64).sum()
    }

    pub fn segment_duration(&self) -> f64 {
        self.frames_per_segment as f64 / self.frame_rate as f64
    }

    /// Coding rate of a segment in kbps, from its packet sizes.
    pub fn segment_kbps(&self, segment: usize) -> f64 {
        self.segment_bytes(segment) as f64 * 8.0 / self.segment_duration() / 1000.0
    }

    pub fn total_bytes(&self) -> u64 {
        (0..self.segments.len()).map(|s| self.segment_bytes(s)).sum()
    }

    pub fn total_importance(&self) -> f64 {
        self.packets().map(|p| p.importance).sum()
    }

    pub fn packets(&self) -> impl Iterator<Item = &VideoPacket> {
        self.segments.iter().flatten()
    }

    pub fn packet_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn duration(&self) -> f64 {
        self.segments.len() as f64 * self.segment_duration()
    }
}

/// Round to the 6 decimal digits the trace format stores.
pub(crate) fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
