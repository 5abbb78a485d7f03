use crate::error::{invalid, Error, Result};
use crate::event::{SensorGeometry, TimeWindow, Timestamp};

use super::est::est_tensor;
use super::{default_time_range, Measurement, TieVariant};

pub const DEFAULT_CHANNELS: usize = 9;

/// Signed temporal channels `[C][y][x]` of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct TieTensor {
    pub channels: Vec<f64>,
    pub num_channels: usize,
    pub variant: TieVariant,
    pub t_lo: Timestamp,
    pub t_hi: Timestamp,
    pub geometry: SensorGeometry,
}

impl TieTensor {
    /// Wraps raw channel data, checking shape and the multiple-of-three rule.
    pub fn from_channels(
        geometry: SensorGeometry,
        num_channels: usize,
        variant: TieVariant,
        channels: Vec<f64>,
    ) -> Result<Self> {
        check_channels(num_channels)?;
        let expected = num_channels * geometry.pixels();
        if channels.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{num_channels}x{geometry} = {expected} values"),
                actual: format!("{} values", channels.len()),
            });
        }
        if channels.iter().any(|v| !v.is_finite()) {
            return Err(invalid("TIE tensor values must be finite"));
        }
        Ok(Self {
            channels,
            num_channels,
            variant,
            t_lo: 0,
            t_hi: 0,
            geometry,
        })
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        let g = self.geometry;
        self.channels[(c * g.height as usize + y) * g.width as usize + x]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.channels.iter().map(|&v| v as f32).collect()
    }

    pub fn shape(&self) -> [usize; 3] {
        [
            self.num_channels,
            self.geometry.height as usize,
            self.geometry.width as usize,
        ]
    }
}

fn check_channels(c: usize) -> Result<()> {
    if c == 0 || c % 3 != 0 {
        return Err(invalid(format!(
            "channel count must be a positive multiple of 3, got {c}"
        )));
    }
    Ok(())
}

/// Per-polarity EST with `C` bins under the variant's normalizations, combined as `S+ - S-`.
pub fn tie_tensor(
    window: &TimeWindow<'_>,
    geometry: SensorGeometry,
    num_channels: usize,
    variant: TieVariant,
) -> Result<TieTensor> {
    check_channels(num_channels)?;
    let (t_lo, t_hi) = default_time_range(window);
    let grid = est_tensor(
        window,
        geometry,
        num_channels,
        Measurement::Time(variant.measurement),
        variant.kernel_time,
        Some((t_lo, t_hi)),
    )?;
    let channels = grid
        .plane(0)
        .iter()
        .zip(grid.plane(1))
        .map(|(pos, neg)| pos - neg)
        .collect();
    Ok(TieTensor {
        channels,
        num_channels,
        variant,
        t_lo,
        t_hi,
        geometry,
    })
}

/// Linear-interpolation percentiles at fractions `p_lo` and `p_hi` (rank `p * (n - 1)`).
pub fn percentiles(values: &[f64], p_lo: f64, p_hi: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("percentiles of an empty collection"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("percentile input must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok((interpolated(&sorted, p_lo), interpolated(&sorted, p_hi)))
}

fn interpolated(sorted: &[f64], p: f64) -> f64 {
    let rank = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// 3-channel byte image, planar `[3][y][x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TieImage {
    pub width: u16,
    pub height: u16,
    pub rgb: Vec<u8>,
    /// 1% cut value.
    pub z_lo: f64,
    /// 99% cut value.
    pub z_hi: f64,
    /// Set when the percentile range collapsed and the image is all zero.
    pub degenerate: bool,
}

impl TieImage {
    pub fn zeros(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            rgb: vec![0; 3 * width as usize * height as usize],
            z_lo: 0.0,
            z_hi: 0.0,
            degenerate: true,
        }
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> u8 {
        self.rgb[(c * self.height as usize + y) * self.width as usize + x]
    }

    /// Interleaved `RGBRGB...` bytes as stored in a P6 file.
    pub fn interleaved(&self) -> Vec<u8> {
        let plane = self.width as usize * self.height as usize;
        let mut out = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            out.extend_from_slice(&[self.rgb[i], self.rgb[plane + i], self.rgb[2 * plane + i]]);
        }
        out
    }

    pub fn from_interleaved(width: u16, height: u16, data: &[u8]) -> Result<Self> {
        let plane = width as usize * height as usize;
        if data.len() != 3 * plane {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bytes", 3 * plane),
                actual: format!("{} bytes", data.len()),
            });
        }
        let mut rgb = vec![0; 3 * plane];
        for (i, px) in data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                rgb[c * plane + i] = px[c];
            }
        }
        Ok(Self {
            width,
            height,
            rgb,
            z_lo: 0.0,
            z_hi: 0.0,
            degenerate: false,
        })
    }
}

/// Sums consecutive groups of `C/3` channels, cuts at the 1%/99% percentiles and
/// scales to bytes (round half to even).
pub fn tie_to_rgb(tensor: &TieTensor) -> Result<TieImage> {
    check_channels(tensor.num_channels)?;
    let g = tensor.geometry;
    let plane = g.pixels();
    let group = tensor.num_channels / 3;
    let mut grouped = vec![0.0; 3 * plane];
    for (c, chan) in tensor.channels.chunks_exact(plane).enumerate() {
        let dst = &mut grouped[(c / group) * plane..(c / group + 1) * plane];
        for (d, v) in dst.iter_mut().zip(chan) {
            *d += v;
        }
    }
    let (z_lo, z_hi) = percentiles(&grouped, 0.01, 0.99)?;
    if !(z_hi > z_lo) {
        return Ok(TieImage {
            z_lo,
            z_hi,
            ..TieImage::zeros(g.width, g.height)
        });
    }
    let span = z_hi - z_lo;
    let rgb = grouped
        .iter()
        .map(|&z| {
            let unit = ((z - z_lo) / span).clamp(0.0, 1.0);
            (unit * 255.0).round_ties_even() as u8
        })
        .collect();
    Ok(TieImage {
        width: g.width,
        height: g.height,
        rgb,
        z_lo,
        z_hi,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventStream};
    use proptest::prelude::*;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentiles(&[3.5], 0.01, 0.99).unwrap(), (3.5, 3.5));
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        let (lo, hi) = percentiles(&v, 0.01, 0.99).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 99.0).abs() < 1e-12);
        let mut shuffled = v.clone();
        shuffled.reverse();
        shuffled.swap(3, 70);
        assert_eq!(percentiles(&shuffled, 0.01, 0.99).unwrap(), (lo, hi));
        assert!(matches!(percentiles(&[], 0.01, 0.99), Err(Error::Empty(_))));
    }

    #[test]
    fn zero_tensor_is_degenerate() {
        let g = SensorGeometry::new(4, 4).unwrap();
        let s = EventStream::empty(g);
        let t = tie_tensor(&s.as_window(), g, 9, TieVariant::THT).unwrap();
        assert!(t.channels.iter().all(|&v| v == 0.0));
        let img = tie_to_rgb(&t).unwrap();
        assert!(img.degenerate);
        assert!(img.rgb.iter().all(|&b| b == 0));
    }

    #[test]
    fn uniform_ramp_percentiles_and_saturation() {
        // 3 channels of 1x1000 each holds 0..999 once; C=3 makes grouping the identity.
        let g = SensorGeometry::new(1000, 1).unwrap();
        let mut values = Vec::new();
        for c in 0..3 {
            values.extend((0..1000).map(|i| ((i + 333 * c) % 1000) as f64));
        }
        let t = TieTensor::from_channels(g, 3, TieVariant::TT, values.clone()).unwrap();
        let img = tie_to_rgb(&t).unwrap();
        // Oracle on the sorted multiset {0..999} x3: rank p*(n-1).
        let mut sorted = values;
        sorted.sort_by(f64::total_cmp);
        let rank = 0.01 * 2999.0;
        let oracle_lo = sorted[29] + (sorted[30] - sorted[29]) * (rank - 29.0);
        assert!((img.z_lo - oracle_lo).abs() < 1e-9);
        assert!((img.z_lo - 9.99).abs() < 0.02);
        assert!((img.z_hi - 989.01).abs() < 0.02);
        assert_eq!(img.get(0, 0, 0), 0);
        assert_eq!(img.get(0, 999, 0), 255);
    }

    #[test]
    fn ramp_percentiles() {
        let values: Vec<f64> = (0..1000).map(f64::from).collect();
        let (lo, hi) = percentiles(&values, 0.01, 0.99).unwrap();
        assert!((lo - 9.99).abs() < 1e-9);
        assert!((hi - 989.01).abs() < 1e-9);
    }

    #[test]
    fn signed_cancellation() {
        let g = SensorGeometry::new(3, 3).unwrap();
        let s = EventStream::new(
            g,
            vec![
                Event::new(10, 1, 1, 1),
                Event::new(10, 1, 1, -1),
                Event::new(90, 2, 0, -1),
                Event::new(90, 2, 0, 1),
            ],
        )
        .unwrap();
        for v in TieVariant::ALL {
            let t = tie_tensor(&s.as_window(), g, 9, v).unwrap();
            assert!(t.channels.iter().all(|&x| x == 0.0), "{v}");
        }
    }

    #[test]
    fn tau_equals_tau_hat_when_stream_starts_at_zero() {
        let g = SensorGeometry::new(3, 3).unwrap();
        let s = EventStream::new(
            g,
            vec![
                Event::new(0, 0, 0, 1),
                Event::new(40, 1, 2, -1),
                Event::new(77, 2, 2, 1),
                Event::new(100, 1, 1, 1),
            ],
        )
        .unwrap();
        let a = tie_tensor(&s.as_window(), g, 9, TieVariant::TT).unwrap();
        let b = tie_tensor(&s.as_window(), g, 9, TieVariant::THH).unwrap();
        assert_eq!(a.channels, b.channels);
    }

    #[test]
    fn bad_channel_count() {
        let g = SensorGeometry::new(2, 2).unwrap();
        let s = EventStream::empty(g);
        assert!(tie_tensor(&s.as_window(), g, 8, TieVariant::TT).is_err());
        assert!(tie_tensor(&s.as_window(), g, 0, TieVariant::TT).is_err());
    }

    #[test]
    fn interleave_round_trip() {
        let img = TieImage {
            width: 2,
            height: 1,
            rgb: vec![1, 2, 3, 4, 5, 6],
            z_lo: 0.0,
            z_hi: 0.0,
            degenerate: false,
        };
        let inter = img.interleaved();
        assert_eq!(inter, vec![1, 3, 5, 2, 4, 6]);
        assert_eq!(TieImage::from_interleaved(2, 1, &inter).unwrap().rgb, img.rgb);
    }

    proptest! {
        #[test]
        fn bytes_cover_full_range_for_any_finite_input(
            values in prop::collection::vec(-1e6f64..1e6, 27)
        ) {
            let g = SensorGeometry::new(3, 3).unwrap();
            let t = TieTensor::from_channels(g, 3, TieVariant::TT, values).unwrap();
            let img = tie_to_rgb(&t).unwrap();
            prop_assert_eq!(img.rgb.len(), 27);
            prop_assert!(img.z_lo <= img.z_hi);
        }
    }
}
