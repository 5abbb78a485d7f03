use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{pair_windows, GrayFrame};
use crate::error::{invalid, Result};
use crate::event::{TimeWindow, Timestamp};
use crate::repr::{tie_tensor, tie_to_rgb, TieImage, TieVariant, DEFAULT_CHANNELS};
use crate::toyml::model::{prepare_input, prepare_target, SEQUENCE_LEN};
use crate::toyml::{ReconPair, Sample};

use super::events::read_events;
use super::manifest::{read_manifest, Manifest, Split};
use super::pnm::read_frame_pgm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// Block length; each block splits into `n` sub-windows.
    pub delta_t: Timestamp,
    pub n: usize,
    pub variant: TieVariant,
    pub channels: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            delta_t: 100_000,
            n: 3,
            variant: TieVariant::default(),
            channels: DEFAULT_CHANNELS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedSample {
    pub id: String,
    pub label: usize,
    pub split: Split,
    /// One TIE image per window, in time order.
    pub windows: Vec<TieImage>,
    /// Frame paired with each window (first frame at or after its end).
    pub window_frames: Vec<usize>,
    pub frames: Vec<GrayFrame>,
    /// Set when fewer than three windows existed and zero images were appended.
    pub padded: bool,
}

impl LoadedSample {
    /// Overlapping runs of three consecutive windows; `max(1, windows - 2)` of them.
    pub fn triplets(&self) -> Vec<&[TieImage]> {
        self.windows.windows(SEQUENCE_LEN).collect()
    }
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub classes: Vec<String>,
    pub config: WindowConfig,
    pub samples: Vec<LoadedSample>,
}

impl LoadedDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LoadedSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// One classification sample per triplet, inputs prepared at `side x side`.
    pub fn class_samples(&self, split: Split, side: usize) -> Vec<Sample> {
        let mut out = Vec::new();
        for s in self.split(split) {
            let prepared: Vec<Vec<f64>> = s.windows.iter().map(|w| prepare_input(w, side)).collect();
            for k in 0..prepared.len() + 1 - SEQUENCE_LEN {
                out.push(Sample {
                    windows: prepared[k..k + SEQUENCE_LEN].to_vec(),
                    label: s.label,
                });
            }
        }
        out
    }

    /// Every real (unpadded) window paired with its frame.
    pub fn recon_pairs(&self, split: Split, side: usize) -> Vec<ReconPair> {
        let mut out = Vec::new();
        for s in self.split(split) {
            for (w, &f) in s.windows.iter().zip(&s.window_frames) {
                out.push(ReconPair {
                    input: prepare_input(w, side),
                    target: prepare_target(&s.frames[f], side),
                });
            }
        }
        out
    }
}

/// Windows each sample from its first to last frame time, renders a TIE image per
/// window and pads short samples with zero images up to three windows.
pub fn load_dataset(manifest_path: impl AsRef<Path>, cfg: &WindowConfig) -> Result<LoadedDataset> {
    let manifest = read_manifest(manifest_path)?;
    load_from_manifest(&manifest, cfg)
}

pub fn load_from_manifest(manifest: &Manifest, cfg: &WindowConfig) -> Result<LoadedDataset> {
    if cfg.n == 0 || cfg.delta_t < cfg.n as Timestamp {
        return Err(invalid(format!("window config needs n >= 1 and delta_t >= n, got delta_t={} n={}", cfg.delta_t, cfg.n)));
    }
    let samples = manifest
        .samples
        .par_iter()
        .map(|entry| -> Result<LoadedSample> {
            let stream = read_events(manifest.resolve(&entry.events))?;
            let frames = entry
                .frames
                .iter()
                .map(|p| read_frame_pgm(manifest.resolve(p)))
                .collect::<Result<Vec<_>>>()?;
            let geometry = stream.geometry();
            let pairs = pair_windows(&stream, &entry.frame_times_us, cfg.delta_t, cfg.n)?;
            let mut windows = Vec::with_capacity(pairs.len().max(SEQUENCE_LEN));
            for pw in &pairs {
                let w = &pw.window;
                let tw = TimeWindow {
                    t_start: w.t_start,
                    t_end: w.t_end,
                    end_inclusive: w.end_inclusive,
                    events: &stream.events()[w.events.clone()],
                };
                windows.push(tie_to_rgb(&tie_tensor(&tw, geometry, cfg.channels, cfg.variant)?)?);
            }
            let padded = windows.len() < SEQUENCE_LEN;
            while windows.len() < SEQUENCE_LEN {
                windows.push(TieImage::zeros(geometry.width, geometry.height));
            }
            Ok(LoadedSample {
                id: entry.id.clone(),
                label: entry.label,
                split: entry.split,
                windows,
                window_frames: pairs.iter().map(|p| p.frame_index).collect(),
                frames,
                padded,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        classes: manifest.classes.clone(),
        config: *cfg,
        samples,
    })
}
