//! Dense representations of event windows: count frames, time surfaces,
//! voxel-grid spike tensors and the channel-grouped TIE image.

mod est;
mod tie;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::event::{SensorGeometry, TimeWindow, Timestamp};

pub use est::{est_tensor, triangular_weights, EstGrid, POLARITIES};
pub use tie::{percentiles, tie_tensor, tie_to_rgb, TieImage, TieTensor, DEFAULT_CHANNELS};

/// Timestamp normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeNorm {
    /// `t / t_N`.
    Tau,
    /// `(t - t_1) / (t_N - t_1)`.
    TauHat,
}

/// Per-event value accumulated into a voxel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Count,
    Polarity,
    Time(TimeNorm),
}

/// Maps raw timestamps onto a normalized axis given the normalization range.
///
/// Degenerate ranges map every timestamp to 0: `t_hi == t_lo` for `TauHat`, `t_hi == 0` for `Tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub norm: TimeNorm,
    pub t_lo: Timestamp,
    pub t_hi: Timestamp,
}

impl Normalizer {
    pub fn new(norm: TimeNorm, t_lo: Timestamp, t_hi: Timestamp) -> Self {
        Self { norm, t_lo, t_hi }
    }

    pub fn apply(&self, t: Timestamp) -> f64 {
        match self.norm {
            TimeNorm::Tau => {
                if self.t_hi == 0 {
                    0.0
                } else {
                    t as f64 / self.t_hi as f64
                }
            }
            TimeNorm::TauHat => {
                if self.t_hi == self.t_lo {
                    0.0
                } else {
                    (t as f64 - self.t_lo as f64) / (self.t_hi - self.t_lo) as f64
                }
            }
        }
    }
}

impl Measurement {
    pub fn evaluate(&self, t: Timestamp, p: i8, t_lo: Timestamp, t_hi: Timestamp) -> f64 {
        match *self {
            Measurement::Count => 1.0,
            Measurement::Polarity => p as f64,
            Measurement::Time(norm) => Normalizer::new(norm, t_lo, t_hi).apply(t),
        }
    }
}

/// One of the four measurement/kernel normalization pairings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TieVariant {
    pub measurement: TimeNorm,
    pub kernel_time: TimeNorm,
}

impl TieVariant {
    pub const TT: TieVariant = TieVariant::new(TimeNorm::Tau, TimeNorm::Tau);
    pub const TTH: TieVariant = TieVariant::new(TimeNorm::Tau, TimeNorm::TauHat);
    pub const THT: TieVariant = TieVariant::new(TimeNorm::TauHat, TimeNorm::Tau);
    pub const THH: TieVariant = TieVariant::new(TimeNorm::TauHat, TimeNorm::TauHat);
    pub const ALL: [TieVariant; 4] = [Self::TT, Self::TTH, Self::THT, Self::THH];

    pub const fn new(measurement: TimeNorm, kernel_time: TimeNorm) -> Self {
        Self {
            measurement,
            kernel_time,
        }
    }

    /// Short flag name: `tt`, `tth`, `tht` or `thh`.
    pub fn code(&self) -> &'static str {
        match (self.measurement, self.kernel_time) {
            (TimeNorm::Tau, TimeNorm::Tau) => "tt",
            (TimeNorm::Tau, TimeNorm::TauHat) => "tth",
            (TimeNorm::TauHat, TimeNorm::Tau) => "tht",
            (TimeNorm::TauHat, TimeNorm::TauHat) => "thh",
        }
    }
}

impl Default for TieVariant {
    fn default() -> Self {
        Self::THT
    }
}

impl fmt::Display for TieVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TieVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tt" => Ok(Self::TT),
            "tth" => Ok(Self::TTH),
            "tht" => Ok(Self::THT),
            "thh" => Ok(Self::THH),
            other => Err(invalid(format!(
                "unknown TIE variant {other:?} (expected tt, tth, tht or thh)"
            ))),
        }
    }
}

/// First and last event timestamps of a window, or its bounds when empty.
pub fn default_time_range(window: &TimeWindow<'_>) -> (Timestamp, Timestamp) {
    match (window.first_time(), window.last_time()) {
        (Some(a), Some(b)) => (a, b),
        _ => (window.t_start, window.t_end),
    }
}

/// Per-polarity event counts, indexed `[polarity][y][x]` with polarity 0 = positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventFrame {
    pub geometry: SensorGeometry,
    pub counts: Vec<u32>,
}

impl EventFrame {
    pub fn get(&self, polarity: usize, x: usize, y: usize) -> u32 {
        let g = self.geometry;
        self.counts[(polarity * g.height as usize + y) * g.width as usize + x]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn polarity_index(p: i8) -> usize {
    if p > 0 {
        0
    } else {
        1
    }
}

pub fn event_frame(window: &TimeWindow<'_>, geometry: SensorGeometry) -> EventFrame {
    let plane = geometry.pixels();
    let width = geometry.width as usize;
    let mut counts = vec![0u32; 2 * plane];
    for e in window.events {
        counts[polarity_index(e.p) * plane + e.y as usize * width + e.x as usize] += 1;
    }
    EventFrame { geometry, counts }
}

/// Latest normalized (`TauHat`) timestamp per pixel and polarity, 0 where no event fired.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSurface {
    pub geometry: SensorGeometry,
    pub values: Vec<f64>,
}

impl TimeSurface {
    pub fn get(&self, polarity: usize, x: usize, y: usize) -> f64 {
        let g = self.geometry;
        self.values[(polarity * g.height as usize + y) * g.width as usize + x]
    }
}

pub fn time_surface(window: &TimeWindow<'_>, geometry: SensorGeometry) -> TimeSurface {
    let plane = geometry.pixels();
    let width = geometry.width as usize;
    let (t_lo, t_hi) = default_time_range(window);
    let norm = Normalizer::new(TimeNorm::TauHat, t_lo, t_hi);
    let mut values = vec![0.0; 2 * plane];
    // Events are time-sorted, so the last write per pixel is the latest event.
    for e in window.events {
        values[polarity_index(e.p) * plane + e.y as usize * width + e.x as usize] = norm.apply(e.t);
    }
    TimeSurface { geometry, values }
}
