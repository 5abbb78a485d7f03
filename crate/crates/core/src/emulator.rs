//! Frame-to-event emulation with the log-intensity threshold model.
//!
//! Each pixel keeps a reference log intensity. Whenever the (optionally
//! low-passed) log signal moves a full threshold away from it, an event is
//! emitted and the reference advances by that threshold. Between frames the log
//! signal is interpolated linearly, which fixes the crossing timestamps.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::event::{window_ranges, Event, EventStream, SensorGeometry, TimeWindow, Timestamp, WindowRange};

/// Smallest per-pixel threshold a mismatch draw may produce.
pub const MIN_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmulatorConfig {
    /// Nominal contrast threshold in log-intensity units.
    pub threshold_c: f64,
    /// Standard deviation of the per-pixel threshold mismatch.
    pub sigma_threshold: f64,
    pub timestamp_resolution_us: Timestamp,
    /// First-order low-pass cutoff; 0 disables the filter.
    pub cutoff_hz: f64,
    pub log_eps: f64,
    /// Echoed in sidecars and manifests; not used by the model.
    pub exposure_us: Timestamp,
    pub seed: u64,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            threshold_c: 0.15,
            sigma_threshold: 0.03,
            timestamp_resolution_us: 1000,
            cutoff_hz: 30.0,
            log_eps: 1e-3,
            exposure_us: 5000,
            seed: 42,
        }
    }
}

impl EmulatorConfig {
    /// Ideal sensor: no mismatch, no filtering.
    pub fn ideal(threshold_c: f64) -> Self {
        Self {
            threshold_c,
            sigma_threshold: 0.0,
            cutoff_hz: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_c > 0.0 && self.threshold_c.is_finite()) {
            return Err(invalid(format!(
                "threshold_c must be positive, got {}",
                self.threshold_c
            )));
        }
        if !(self.sigma_threshold >= 0.0 && self.sigma_threshold.is_finite()) {
            return Err(invalid(format!(
                "sigma_threshold must be non-negative, got {}",
                self.sigma_threshold
            )));
        }
        if self.timestamp_resolution_us == 0 {
            return Err(invalid("timestamp_resolution_us must be at least 1"));
        }
        if !(self.cutoff_hz >= 0.0 && self.cutoff_hz.is_finite()) {
            return Err(invalid(format!(
                "cutoff_hz must be non-negative, got {}",
                self.cutoff_hz
            )));
        }
        if !(self.log_eps > 0.0) {
            return Err(invalid("log_eps must be positive"));
        }
        Ok(())
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: u16,
    pub height: u16,
    pub data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: u16, height: u16, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} pixels ({width}x{height})"),
                actual: format!("{} pixels", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u16, height: u16, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        SensorGeometry {
            width: self.width,
            height: self.height,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width as usize + x]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<GrayFrame>,
    timestamps: Vec<Timestamp>,
    geometry: SensorGeometry,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayFrame>, timestamps: Vec<Timestamp>) -> Result<Self> {
        if frames.len() != timestamps.len() {
            return Err(invalid(format!(
                "{} frames but {} timestamps",
                frames.len(),
                timestamps.len()
            )));
        }
        let geometry = match frames.first() {
            Some(f) => SensorGeometry::new(f.width, f.height)?,
            None => return Err(Error::InsufficientFrames(0)),
        };
        if let Some(bad) = frames.iter().position(|f| f.geometry() != geometry) {
            return Err(invalid(format!(
                "frame {bad} is {} but frame 0 is {geometry}",
                frames[bad].geometry()
            )));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("frame timestamps must be strictly increasing"));
        }
        Ok(Self {
            frames,
            timestamps,
            geometry,
        })
    }

    /// Frames spaced `interval_us` apart starting at 0.
    pub fn uniform(frames: Vec<GrayFrame>, interval_us: Timestamp) -> Result<Self> {
        let timestamps = (0..frames.len() as Timestamp)
            .map(|i| i * interval_us)
            .collect();
        Self::new(frames, timestamps)
    }

    pub fn frames(&self) -> &[GrayFrame] {
        &self.frames
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn reversed(&self) -> FrameSequence {
        let frames = self.frames.iter().rev().cloned().collect();
        Self {
            frames,
            timestamps: self.timestamps.clone(),
            geometry: self.geometry,
        }
    }
}

/// `log(I / 255 + eps)` per pixel.
pub fn log_luma(frame: &GrayFrame, log_eps: f64) -> Vec<f64> {
    frame
        .data
        .iter()
        .map(|&v| log_intensity(v, log_eps))
        .collect()
}

pub fn log_intensity(value: u8, log_eps: f64) -> f64 {
    (value as f64 / 255.0 + log_eps).ln()
}

/// Smoothing factor of the first-order filter over a step of `dt_us`.
pub fn lowpass_alpha(cutoff_hz: f64, dt_us: Timestamp) -> f64 {
    if cutoff_hz <= 0.0 {
        1.0
    } else {
        1.0 - (-2.0 * PI * cutoff_hz * dt_us as f64 * 1e-6).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelState {
    /// Log intensity at the last emitted event (or at initialization).
    pub l_ref: f64,
    /// Low-pass filter output.
    pub l_lp: f64,
    pub c_pos: f64,
    pub c_neg: f64,
}

impl PixelState {
    /// Initial state at log intensity `l0` with thresholds drawn for pixel `(x, y)`.
    pub fn new(l0: f64, cfg: &EmulatorConfig, x: u16, y: u16) -> Self {
        let (c_pos, c_neg) = draw_thresholds(cfg, x, y);
        Self {
            l_ref: l0,
            l_lp: l0,
            c_pos,
            c_neg,
        }
    }

    /// State with explicit thresholds.
    pub fn with_thresholds(l0: f64, c_pos: f64, c_neg: f64) -> Self {
        Self {
            l_ref: l0,
            l_lp: l0,
            c_pos,
            c_neg,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-pixel seed, independent of the order pixels are visited in.
pub fn pixel_seed(seed: u64, x: u16, y: u16) -> u64 {
    splitmix64(seed ^ splitmix64(((y as u64) << 16) | x as u64))
}

fn draw_thresholds(cfg: &EmulatorConfig, x: u16, y: u16) -> (f64, f64) {
    if cfg.sigma_threshold == 0.0 {
        let c = cfg.threshold_c.max(MIN_THRESHOLD);
        return (c, c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pixel_seed(cfg.seed, x, y));
    let normal = Normal::new(cfg.threshold_c, cfg.sigma_threshold)
        .expect("validated sigma is finite and non-negative");
    let c_pos = normal.sample(&mut rng).max(MIN_THRESHOLD);
    let c_neg = normal.sample(&mut rng).max(MIN_THRESHOLD);
    (c_pos, c_neg)
}

/// Advances the low-pass filter towards `l_in` over `dt_us`.
pub fn lowpass_step(state: &mut PixelState, l_in: f64, dt_us: Timestamp, cutoff_hz: f64) {
    if cutoff_hz <= 0.0 {
        state.l_lp = l_in;
    } else {
        let alpha = lowpass_alpha(cutoff_hz, dt_us);
        state.l_lp += alpha * (l_in - state.l_lp);
    }
}

fn quantize(t: f64, resolution: Timestamp) -> Timestamp {
    let res = resolution as f64;
    ((t / res).floor() * res) as Timestamp
}

/// Threshold crossings of the linear log signal from `l_prev` at `t_prev` to
/// `l_cur` at `t_cur`, as `(timestamp, polarity)` in time order. Updates `l_ref`.
pub fn emulate_pixel(
    state: &mut PixelState,
    l_prev: f64,
    l_cur: f64,
    t_prev: Timestamp,
    t_cur: Timestamp,
    cfg: &EmulatorConfig,
) -> Vec<(Timestamp, i8)> {
    let mut out = Vec::new();
    emit_crossings(state, l_prev, l_cur, t_prev, t_cur, cfg, |t, p| {
        out.push((t, p))
    });
    out
}

fn emit_crossings(
    state: &mut PixelState,
    l_prev: f64,
    l_cur: f64,
    t_prev: Timestamp,
    t_cur: Timestamp,
    cfg: &EmulatorConfig,
    mut emit: impl FnMut(Timestamp, i8),
) {
    debug_assert!(t_prev < t_cur);
    let span = l_cur - l_prev;
    let dt = (t_cur - t_prev) as f64;
    let crossing_time = |level: f64| {
        let frac = if span.abs() > f64::EPSILON {
            ((level - l_prev) / span).clamp(0.0, 1.0)
        } else {
            1.0
        };
        quantize(t_prev as f64 + frac * dt, cfg.timestamp_resolution_us)
    };

    let base = state.l_ref;
    let mut k = 0u32;
    while l_cur - (base + k as f64 * state.c_pos) >= state.c_pos {
        k += 1;
        emit(crossing_time(base + k as f64 * state.c_pos), 1);
    }
    if k > 0 {
        state.l_ref = base + k as f64 * state.c_pos;
        return;
    }
    while (base - k as f64 * state.c_neg) - l_cur >= state.c_neg {
        k += 1;
        emit(crossing_time(base - k as f64 * state.c_neg), -1);
    }
    if k > 0 {
        state.l_ref = base - k as f64 * state.c_neg;
    }
}

/// Emulates every pixel over the whole sequence and merges the result sorted by
/// `(t, y, x, p)`.
pub fn emulate_sequence(frames: &FrameSequence, cfg: &EmulatorConfig) -> Result<EventStream> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::InsufficientFrames(frames.len()));
    }
    let geometry = frames.geometry();
    let width = geometry.width as usize;
    let logs: Vec<Vec<f64>> = frames
        .frames()
        .iter()
        .map(|f| log_luma(f, cfg.log_eps))
        .collect();
    let times = frames.timestamps();

    let rows: Vec<Vec<Event>> = (0..geometry.height as usize)
        .into_par_iter()
        .map(|y| {
            let mut row_events = Vec::new();
            for x in 0..width {
                let idx = y * width + x;
                let mut state = PixelState::new(logs[0][idx], cfg, x as u16, y as u16);
                for i in 1..logs.len() {
                    let l_prev = state.l_lp;
                    lowpass_step(&mut state, logs[i][idx], times[i] - times[i - 1], cfg.cutoff_hz);
                    let l_cur = state.l_lp;
                    emit_crossings(&mut state, l_prev, l_cur, times[i - 1], times[i], cfg, |t, p| {
                        row_events.push(Event::new(t, x as u16, y as u16, p))
                    });
                }
            }
            row_events
        })
        .collect();

    let mut events: Vec<Event> = rows.into_iter().flatten().collect();
    events.sort_unstable_by_key(Event::sort_key);
    Ok(EventStream::from_raw(geometry, events))
}

/// One window of an emulated stream and the frame it is paired with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairedWindow {
    pub window: WindowRange,
    /// Index of the first frame at or after the window end.
    pub frame_index: usize,
}

#[derive(Clone, Debug)]
pub struct PairedSamples {
    pub stream: EventStream,
    pub pairs: Vec<PairedWindow>,
}

impl PairedSamples {
    pub fn window(&self, i: usize) -> TimeWindow<'_> {
        let w = &self.pairs[i].window;
        TimeWindow {
            t_start: w.t_start,
            t_end: w.t_end,
            end_inclusive: w.end_inclusive,
            events: &self.stream.events()[w.events.clone()],
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Windows anchored at the first frame, each paired with the next frame at or
/// after its end.
pub fn pair_windows(
    stream: &EventStream,
    timestamps: &[Timestamp],
    delta_t: Timestamp,
    n: usize,
) -> Result<Vec<PairedWindow>> {
    let (first, last) = match (timestamps.first(), timestamps.last()) {
        (Some(&a), Some(&b)) if timestamps.len() >= 2 => (a, b),
        _ => return Err(Error::InsufficientFrames(timestamps.len())),
    };
    let windows = window_ranges(stream.events(), first, last, delta_t, n)?;
    Ok(windows
        .into_iter()
        .map(|window| {
            let frame_index = timestamps
                .iter()
                .position(|&t| t >= window.t_end)
                .unwrap_or(timestamps.len() - 1);
            PairedWindow {
                window,
                frame_index,
            }
        })
        .collect())
}

/// Emulates the sequence and pairs each time window with its trailing frame.
pub fn paired_samples(
    frames: &FrameSequence,
    cfg: &EmulatorConfig,
    delta_t: Timestamp,
    n: usize,
) -> Result<PairedSamples> {
    let stream = emulate_sequence(frames, cfg)?;
    let pairs = pair_windows(&stream, frames.timestamps(), delta_t, n)?;
    Ok(PairedSamples { stream, pairs })
}
