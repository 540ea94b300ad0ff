//! Synthetic packet traces calibrated to published per-segment coding rates.
//!
//! Each frame is split into slice packets; every packet gets a macroblock
//! mix and motion field drawn from seeded distributions, and its importance
//! is computed from those statistics once, at generation time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::importance::{compute_importance, MacroblockStat, MbMode, PacketCoding};
use super::{round6, VideoPacket, VideoSequence, MAX_REF_FRACTION};
use crate::channel::stream_rng;
use crate::{Error, Result};

const CIF_WIDTH: u32 = 352;
const CIF_HEIGHT: u32 = 288;
const FRAME_RATE: u32 = 30;
const FRAMES_PER_SEGMENT: u32 = 60;
const GOP: u32 = 30;
/// Slice target; frames are cut into packets of at most about this size.
const SLICE_BYTES: u64 = 1000;
const I_FRAME_WEIGHT: f64 = 5.0;
const TRACE_STREAM: u64 = 3;

/// Per-segment coding rates (kbps) of the eight CIF test sequences.
pub const STANDARD_SEQUENCES: [(&str, [f64; 8]); 8] = [
    ("flower.cif", [1509.4, 1784.2, 1642.9, 1945.8, 1615.4, 1718.9, 1658.0, 1895.6]),
    ("coastguard.cif", [1316.7, 1302.7, 1051.4, 1000.2, 945.9, 1316.7, 1302.7, 1051.4]),
    ("news.cif", [333.0, 387.5, 362.4, 356.6, 370.3, 333.0, 387.5, 362.4]),
    ("highway.cif", [250.1, 286.9, 258.6, 265.6, 273.1, 252.9, 269.5, 370.2]),
    ("soccer.cif", [744.1, 816.9, 913.2, 773.8, 899.8, 744.1, 816.9, 913.2]),
    ("foreman.cif", [470.6, 464.8, 589.3, 646.6, 600.8, 470.6, 464.8, 589.3]),
    ("crew.cif", [618.2, 965.8, 1189.0, 918.5, 925.1, 618.2, 965.8, 1189.0]),
    ("bus.cif", [1470.2, 1351.8, 1439.6, 1390.3, 1405.3, 1470.2, 1351.8, 1439.6]),
];

/// Content character per named sequence: (motion std in pixels, base
/// intra-MB rate in P frames). Invented to give each trace its own texture.
fn content_character(name: &str) -> (f64, f64) {
    match name {
        "flower.cif" => (6.0, 0.06),
        "coastguard.cif" => (5.0, 0.05),
        "news.cif" => (1.0, 0.015),
        "highway.cif" => (4.0, 0.03),
        "soccer.cif" => (8.0, 0.10),
        "foreman.cif" => (4.0, 0.06),
        "crew.cif" => (6.0, 0.10),
        "bus.cif" => (7.0, 0.07),
        _ => (4.0, 0.05),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceProfile {
    pub name: String,
    pub segment_kbps: Vec<f64>,
    pub motion_px: f64,
    pub intra_rate: f64,
}

impl SequenceProfile {
    /// One of the eight published sequences.
    pub fn named(name: &str) -> Result<Self> {
        let (_, rates) = STANDARD_SEQUENCES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| {
                Error::config(
                    "sequence",
                    format!(
                        "unknown sequence `{name}` (known: {})",
                        STANDARD_SEQUENCES.map(|(n, _)| n).join(", ")
                    ),
                )
            })?;
        Ok(Self::custom(name, rates.to_vec()))
    }

    pub fn custom(name: &str, segment_kbps: Vec<f64>) -> Self {
        let (motion_px, intra_rate) = content_character(name);
        Self {
            name: name.to_string(),
            segment_kbps,
            motion_px,
            intra_rate,
        }
    }
}

/// Split `total` into integer parts proportional to `weights`, each part at
/// least `floor`, by largest remainder (ties to the lower index).
fn apportion(total: u64, weights: &[f64], floor: u64) -> Vec<u64> {
    let n = weights.len() as u64;
    debug_assert!(total >= n * floor);
    let spare = (total - n * floor) as f64;
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| spare * w / wsum).collect();
    let mut parts: Vec<u64> = exact.iter().map(|e| e.floor() as u64 + floor).collect();
    let assigned: u64 = parts.iter().sum();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        parts[i] += 1;
    }
    parts
}

fn block_count(rng: &mut ChaCha8Rng) -> usize {
    match rng.random::<f64>() {
        r if r < 0.5 => 1,
        r if r < 0.7 => 2,
        r if r < 0.9 => 4,
        _ => 16,
    }
}

/// Emit a reproducible trace for `profile`. Segment byte totals equal the
/// declared rate times the 2 s segment duration up to one byte of rounding.
pub fn generate_trace(seed: u64, profile: &SequenceProfile) -> Result<VideoSequence> {
    if profile.segment_kbps.is_empty() {
        return Err(Error::config("sequence", "profile has no segments"));
    }
    if let Some(r) = profile.segment_kbps.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::config("sequence", format!("segment rate {r} must be positive")));
    }

    let mut rng = stream_rng(seed, TRACE_STREAM, 0, 0);
    let duration = FRAMES_PER_SEGMENT as f64 / FRAME_RATE as f64;
    let mbs_per_frame = ((CIF_WIDTH / 16) * (CIF_HEIGHT / 16)) as u64;
    let frame_jitter = LogNormal::new(0.0, 0.35).expect("valid lognormal");
    let i_jitter = LogNormal::new(0.0, 0.15).expect("valid lognormal");
    let activity = LogNormal::new(0.0, 0.6).expect("valid lognormal");
    let motion = Normal::new(0.0, 1.0).expect("valid normal");

    let mut segments = Vec::with_capacity(profile.segment_kbps.len());
    for (s, kbps) in profile.segment_kbps.iter().enumerate() {
        let target = (kbps * 1000.0 * duration / 8.0).round() as u64;
        let weights: Vec<f64> = (0..FRAMES_PER_SEGMENT)
            .map(|f| {
                if f % GOP == 0 {
                    I_FRAME_WEIGHT * i_jitter.sample(&mut rng)
                } else {
                    frame_jitter.sample(&mut rng)
                }
            })
            .collect();
        let frame_bytes = apportion(target, &weights, 2 * 64);

        let mut packets = Vec::new();
        for (f, &bytes) in frame_bytes.iter().enumerate() {
            let gop_pos = f as u32 % GOP;
            let intra_frame = gop_pos == 0;
            let count = (bytes.div_ceil(SLICE_BYTES)).max(2) as usize;
            let size_weights: Vec<f64> =
                (0..count).map(|_| rng.random_range(0.7..1.3)).collect();
            let sizes = apportion(bytes, &size_weights, 1);
            let mb_counts = apportion(mbs_per_frame, &size_weights, 1);

            for (m, (&size, &mbs)) in sizes.iter().zip(&mb_counts).enumerate() {
                let a: f64 = activity.sample(&mut rng);
                let mut coding = PacketCoding::default();
                if intra_frame {
                    let p4 = (0.3 + 0.3 * a).clamp(0.1, 0.9);
                    for _ in 0..mbs {
                        let mode = if rng.random::<f64>() < p4 {
                            MbMode::Intra4x4
                        } else {
                            MbMode::Intra16x16
                        };
                        coding.intra_mbs.push(MacroblockStat::intra(mode));
                    }
                    coding.ref_fraction = MAX_REF_FRACTION * rng.random_range(0.6..1.0);
                } else {
                    let p_intra = (profile.intra_rate * a).clamp(0.0, 0.5);
                    let sigma = profile.motion_px * a;
                    for _ in 0..mbs {
                        if rng.random::<f64>() < p_intra {
                            let mode = if rng.random::<f64>() < 0.5 {
                                MbMode::Intra4x4
                            } else {
                                MbMode::Intra16x16
                            };
                            coding.intra_mbs.push(MacroblockStat::intra(mode));
                        } else {
                            let mvs = (0..block_count(&mut rng))
                                .map(|_| {
                                    (
                                        sigma * motion.sample(&mut rng),
                                        sigma * motion.sample(&mut rng),
                                    )
                                })
                                .collect();
                            coding.inter_mbs.push(MacroblockStat::inter(mvs));
                        }
                    }
                    // Later frames in the GOP are referenced by fewer successors.
                    let remaining = 1.0 - gop_pos as f64 / GOP as f64;
                    coding.ref_fraction = (2.0 * remaining * remaining * rng.random_range(0.3..1.2))
                        .min(MAX_REF_FRACTION);
                }
                coding.ref_fraction = round6(coding.ref_fraction);
                let importance = round6(compute_importance(&coding, CIF_WIDTH, CIF_HEIGHT)?);
                packets.push(VideoPacket {
                    segment: s as u32 + 1,
                    frame: f as u32 + 1,
                    index: m as u32 + 1,
                    size: size as u32,
                    ref_fraction: coding.ref_fraction,
                    importance,
                });
            }
        }
        segments.push(packets);
    }

    Ok(VideoSequence {
        name: profile.name.clone(),
        width: CIF_WIDTH,
        height: CIF_HEIGHT,
        frame_rate: FRAME_RATE,
        frames_per_segment: FRAMES_PER_SEGMENT,
        segments,
    })
}
