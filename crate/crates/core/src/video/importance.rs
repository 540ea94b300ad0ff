use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MbMode {
    Intra4x4,
    Intra16x16,
    Inter,
}

impl MbMode {
    /// Prediction weight used by the synthetic traces.
    pub fn default_weight(self) -> f64 {
        match self {
            MbMode::Intra4x4 => 0.8,
            MbMode::Intra16x16 => 0.6,
            MbMode::Inter => 0.2,
        }
    }

    pub fn is_intra(self) -> bool {
        !matches!(self, MbMode::Inter)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroblockStat {
    pub mode: MbMode,
    pub weight: f64,
    /// Per-block motion vectors in pixels; empty for intra modes.
    pub motion_vectors: Vec<(f64, f64)>,
}

impl MacroblockStat {
    pub fn intra(mode: MbMode) -> Self {
        debug_assert!(mode.is_intra());
        Self {
            mode,
            weight: mode.default_weight(),
            motion_vectors: Vec::new(),
        }
    }

    pub fn inter(motion_vectors: Vec<(f64, f64)>) -> Self {
        Self {
            mode: MbMode::Inter,
            weight: MbMode::Inter.default_weight(),
            motion_vectors,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "macroblock weight {} outside (0, 1]",
                self.weight
            )));
        }
        match (self.mode.is_intra(), self.motion_vectors.is_empty()) {
            (true, false) => Err(Error::InvalidInput(
                "intra macroblock carries motion vectors".into(),
            )),
            (false, true) => Err(Error::InvalidInput(
                "inter macroblock without motion vectors".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Coding statistics of one packet: its intra- and inter-coded macroblocks
/// and the fraction of its pixels later packets reference.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PacketCoding {
    pub intra_mbs: Vec<MacroblockStat>,
    pub inter_mbs: Vec<MacroblockStat>,
    pub ref_fraction: f64,
}

/// Importance of a packet: its own distortion plus what it propagates to
/// dependent packets, `ref_fraction * own`.
///
/// The own distortion sums the weight of every intra MB, and for every inter MB its
/// weight times the summed relative motion intensity of its blocks,
/// `sqrt((mv_x / W)^2 + (mv_y / H)^2)`.
pub fn compute_importance(coding: &PacketCoding, width: u32, height: u32) -> Result<f64> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "frame dimensions must be positive, got {width}x{height}"
        )));
    }
    if !(coding.ref_fraction >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "reference fraction {} is negative",
            coding.ref_fraction
        )));
    }
    let (w, h) = (width as f64, height as f64);

    let mut intra = 0.0;
    for mb in &coding.intra_mbs {
        mb.validate()?;
        if !mb.mode.is_intra() {
            return Err(Error::InvalidInput("inter macroblock in intra list".into()));
        }
        intra += mb.weight;
    }

    let mut inter = 0.0;
    for mb in &coding.inter_mbs {
        mb.validate()?;
        if mb.mode.is_intra() {
            return Err(Error::InvalidInput("intra macroblock in inter list".into()));
        }
        let motion: f64 = mb
            .motion_vectors
            .iter()
            .map(|&(x, y)| ((x / w).powi(2) + (y / h).powi(2)).sqrt())
            .sum();
        inter += mb.weight * motion;
    }

    let current = intra + inter;
    Ok(current * (1.0 + coding.ref_fraction))
}
