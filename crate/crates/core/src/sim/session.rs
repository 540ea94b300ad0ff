//! Client-side playback: frame completion, startup, stalls.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaybackState {
    Startup,
    Playing,
    Stalled,
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stall {
    pub start: f64,
    pub end: Option<f64>,
}

/// Frames become complete once every packet not dropped upstream has been
/// delivered in order; playback consumes complete frames at the frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Playback {
    frame_rate: f64,
    startup_frames: usize,
    /// Packets still missing per frame (global frame index).
    missing: Vec<u32>,
    complete: usize,
    /// Frames whose playout has begun.
    started: usize,
    /// Playout position in seconds of media time.
    media_time: f64,
    state: PlaybackState,
    pub startup_time: Option<f64>,
    pub stalls: Vec<Stall>,
    pub rebuffer_time: f64,
}

impl Playback {
    pub fn new(frame_packets: Vec<u32>, frame_rate: u32, startup_frames: usize) -> Self {
        Self {
            frame_rate: frame_rate as f64,
            startup_frames: startup_frames.clamp(1, frame_packets.len().max(1)),
            missing: frame_packets,
            complete: 0,
            started: 0,
            media_time: 0.0,
            state: PlaybackState::Startup,
            startup_time: None,
            stalls: Vec::new(),
            rebuffer_time: 0.0,
        }
    }

    pub fn state(&self) -> PlaybackState {
        self.state
    }
    pub fn total_frames(&self) -> usize {
        self.missing.len()
    }
    pub fn complete_frames(&self) -> usize {
        self.complete
    }
    pub fn started_frames(&self) -> usize {
        self.started
    }
    pub fn rebuffer_events(&self) -> usize {
        self.stalls.len()
    }

    /// A packet of `frame` arrived (or was dropped on purpose).
    pub fn packet_resolved(&mut self, frame: usize) {
        debug_assert!(self.missing[frame] > 0, "frame {frame} over-resolved");
        self.missing[frame] -= 1;
        while self.complete < self.missing.len() && self.missing[self.complete] == 0 {
            self.complete += 1;
        }
    }

    /// Seconds of complete video not yet played.
    pub fn buffered_seconds(&self) -> f64 {
        (self.complete - self.started.min(self.complete)) as f64 / self.frame_rate
    }

    /// Advance one tick ending at `now`.
    pub fn advance(&mut self, now: f64, dt: f64) {
        match self.state {
            PlaybackState::Finished => {}
            PlaybackState::Startup => {
                if self.complete >= self.startup_frames {
                    self.state = PlaybackState::Playing;
                    self.startup_time = Some(now);
                    self.started = 1;
                    self.media_time = 0.0;
                }
            }
            PlaybackState::Stalled => {
                self.rebuffer_time += dt;
                if self.complete > self.started {
                    self.stalls.last_mut().unwrap().end = Some(now);
                    self.state = PlaybackState::Playing;
                    self.started += 1;
                    self.media_time = (self.started - 1) as f64 / self.frame_rate;
                }
            }
            PlaybackState::Playing => {
                self.media_time += dt;
                let due = ((self.media_time * self.frame_rate) + 1e-9).floor() as usize + 1;
                let total = self.missing.len();
                if due > total {
                    self.state = PlaybackState::Finished;
                    self.started = total;
                    return;
                }
                while self.started < due {
                    if self.started < self.complete {
                        self.started += 1;
                    } else {
                        self.state = PlaybackState::Stalled;
                        self.stalls.push(Stall { start: now, end: None });
                        self.media_time = self.started as f64 / self.frame_rate;
                        break;
                    }
                }
            }
        }
    }
}
