use crate::error::{invalid, Result};
use crate::event::{SensorGeometry, TimeWindow, Timestamp};

use super::{default_time_range, polarity_index, Measurement, Normalizer, TimeNorm};

/// Number of polarity planes in an [`EstGrid`]; index 0 is positive.
pub const POLARITIES: usize = 2;

/// Voxel-grid spike tensor indexed `[polarity][bin][y][x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstGrid {
    pub values: Vec<f64>,
    pub bins: usize,
    pub t_lo: Timestamp,
    pub t_hi: Timestamp,
    pub geometry: SensorGeometry,
}

impl EstGrid {
    pub fn zeros(geometry: SensorGeometry, bins: usize, t_lo: Timestamp, t_hi: Timestamp) -> Self {
        Self {
            values: vec![0.0; POLARITIES * bins * geometry.pixels()],
            bins,
            t_lo,
            t_hi,
            geometry,
        }
    }

    pub fn index(&self, polarity: usize, bin: usize, x: usize, y: usize) -> usize {
        let w = self.geometry.width as usize;
        let h = self.geometry.height as usize;
        ((polarity * self.bins + bin) * h + y) * w + x
    }

    pub fn get(&self, polarity: usize, bin: usize, x: usize, y: usize) -> f64 {
        self.values[self.index(polarity, bin, x, y)]
    }

    /// `[bins][y][x]` slice for one polarity.
    pub fn plane(&self, polarity: usize) -> &[f64] {
        let len = self.bins * self.geometry.pixels();
        &self.values[polarity * len..(polarity + 1) * len]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }

    pub fn shape(&self) -> [usize; 4] {
        [
            POLARITIES,
            self.bins,
            self.geometry.height as usize,
            self.geometry.width as usize,
        ]
    }
}

/// Tent-kernel weights of a normalized time `u` in `[0, 1]` over `bins` centers
/// placed at `n / (bins - 1)`, as `(first_bin, weight_first, weight_next)`.
///
/// The kernel support equals one bin spacing, so the two weights sum to 1.
/// With a single bin all mass goes to bin 0.
pub fn triangular_weights(u: f64, bins: usize) -> (usize, f64, f64) {
    if bins == 1 {
        return (0, 1.0, 0.0);
    }
    let last = (bins - 1) as f64;
    let pos = (u * last).clamp(0.0, last);
    let lower = (pos.floor() as usize).min(bins - 2);
    let frac = pos - lower as f64;
    (lower, 1.0 - frac, frac)
}

/// Accumulates `f(event) * k_tri(t*_n - t*_k)` into `bins` temporal bins per polarity.
///
/// The normalization range defaults to the first and last event timestamps.
pub fn est_tensor(
    window: &TimeWindow<'_>,
    geometry: SensorGeometry,
    bins: usize,
    measurement: Measurement,
    kernel_time: TimeNorm,
    range: Option<(Timestamp, Timestamp)>,
) -> Result<EstGrid> {
    if bins < 1 {
        return Err(invalid("EST needs at least one temporal bin"));
    }
    let (t_lo, t_hi) = range.unwrap_or_else(|| default_time_range(window));
    if t_lo > t_hi {
        return Err(invalid(format!(
            "normalization range [{t_lo}, {t_hi}] is reversed"
        )));
    }
    let mut grid = EstGrid::zeros(geometry, bins, t_lo, t_hi);
    if window.is_empty() {
        return Ok(grid);
    }
    if let Some(e) = window.events.iter().find(|e| e.t < t_lo || e.t > t_hi) {
        return Err(invalid(format!(
            "event at t={} lies outside normalization range [{t_lo}, {t_hi}]",
            e.t
        )));
    }

    let kernel = Normalizer::new(kernel_time, t_lo, t_hi);
    let plane = geometry.pixels();
    let width = geometry.width as usize;
    for e in window.events {
        let f = measurement.evaluate(e.t, e.p, t_lo, t_hi);
        let (bin, w0, w1) = triangular_weights(kernel.apply(e.t), bins);
        let base = polarity_index(e.p) * bins * plane + e.y as usize * width + e.x as usize;
        grid.values[base + bin * plane] += f * w0;
        if w1 != 0.0 {
            grid.values[base + (bin + 1) * plane] += f * w1;
        }
    }
    Ok(grid)
}
