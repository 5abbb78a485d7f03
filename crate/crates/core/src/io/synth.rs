//! Synthetic motion-pattern corpus: a soft-edged bright ellipse on a dark
//! background, moving according to one of seven archetypes.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{emulate_sequence, EmulatorConfig, FrameSequence, GrayFrame};
use crate::error::{invalid, Error, Result};
use crate::event::Timestamp;

use super::events::write_events;
use super::manifest::{stratified_split, write_manifest, Manifest, ManifestEntry, MANIFEST_VERSION};
use super::pnm::write_frame_pgm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionClass {
    Expand,
    Contract,
    TranslateUp,
    TranslateDown,
    RotateCw,
    RotateCcw,
    Blink,
}

impl MotionClass {
    pub const ALL: [MotionClass; 7] = [
        Self::Expand,
        Self::Contract,
        Self::TranslateUp,
        Self::TranslateDown,
        Self::RotateCw,
        Self::RotateCcw,
        Self::Blink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Expand => "expand",
            Self::Contract => "contract",
            Self::TranslateUp => "translate_up",
            Self::TranslateDown => "translate_down",
            Self::RotateCw => "rotate_cw",
            Self::RotateCcw => "rotate_ccw",
            Self::Blink => "blink",
        }
    }
}

impl fmt::Display for MotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| invalid(format!("unknown motion class '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub classes: Vec<MotionClass>,
    pub samples_per_class: usize,
    pub width: u16,
    pub height: u16,
    pub frames: usize,
    pub frame_interval_us: Timestamp,
    /// Per-pixel Gaussian noise, as a fraction of full scale.
    pub noise: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: MotionClass::ALL.to_vec(),
            samples_per_class: 40,
            width: 64,
            height: 64,
            frames: 10,
            frame_interval_us: 33_333,
            noise: 0.02,
            val_fraction: 0.2,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(invalid("synthetic corpus needs at least 2 classes"));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.classes.iter().all(|c| seen.insert(*c)) {
            return Err(invalid("duplicate motion class"));
        }
        if self.frames < 2 {
            return Err(Error::InsufficientFrames(self.frames));
        }
        if self.samples_per_class == 0 || self.width < 8 || self.height < 8 || self.frame_interval_us == 0 {
            return Err(invalid("samples, geometry (>= 8x8) and frame interval must be positive"));
        }
        if !(0.0..=1.0).contains(&self.noise) || !(0.0..1.0).contains(&self.val_fraction) {
            return Err(invalid("noise must lie in [0, 1] and val_fraction in [0, 1)"));
        }
        Ok(())
    }

    pub fn frame_times(&self) -> Vec<Timestamp> {
        (0..self.frames as u64).map(|k| k * self.frame_interval_us).collect()
    }
}

/// Random per-sample appearance and motion parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleParams {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axes as fractions of the smaller image side.
    pub major: f64,
    pub aspect: f64,
    pub angle: f64,
    pub foreground: f64,
    pub background: f64,
    /// Motion magnitude multiplier.
    pub amplitude: f64,
    /// Blink midpoint in normalized sequence time.
    pub phase: f64,
}

impl SampleParams {
    pub fn draw<R: Rng>(rng: &mut R) -> Self {
        Self {
            cx: rng.random_range(-0.08..0.08),
            cy: rng.random_range(-0.08..0.08),
            major: rng.random_range(0.17..0.24),
            aspect: rng.random_range(0.45..0.7),
            angle: rng.random_range(0.0..PI),
            foreground: rng.random_range(170.0..230.0),
            background: rng.random_range(25.0..60.0),
            amplitude: rng.random_range(0.8..1.2),
            phase: rng.random_range(0.35..0.65),
        }
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Renders all frames of one sample. Pure in `(class, params, spec, noise_seed)`.
pub fn render_sample(class: MotionClass, p: &SampleParams, spec: &SyntheticSpec, noise_seed: u64) -> Vec<GrayFrame> {
    let (w, h) = (spec.width as usize, spec.height as usize);
    let side = w.min(h) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, spec.noise * 255.0).expect("validated noise");
    let last = (spec.frames - 1) as f64;
    (0..spec.frames)
        .map(|k| {
            let s = k as f64 / last;
            let amp = p.amplitude;
            let mut cx = w as f64 / 2.0 + p.cx * side;
            let mut cy = h as f64 / 2.0 + p.cy * side;
            let mut scale = 1.0;
            let mut squash = 1.0;
            let mut angle = p.angle;
            match class {
                MotionClass::Expand => scale = 1.0 + 0.6 * amp * s,
                MotionClass::Contract => scale = 1.0 + 0.6 * amp * (1.0 - s),
                MotionClass::TranslateUp => cy += 0.3 * amp * side * (0.5 - s),
                MotionClass::TranslateDown => cy -= 0.3 * amp * side * (0.5 - s),
                MotionClass::RotateCw => angle += 0.5 * PI * amp * s,
                MotionClass::RotateCcw => angle -= 0.5 * PI * amp * s,
                MotionClass::Blink => {
                    let d = (s - p.phase) / 0.3;
                    squash = 1.0 - 0.85 * (-d * d).exp();
                }
            }
            if matches!(class, MotionClass::Expand | MotionClass::Contract) {
                // Keep the growing shape roughly centered.
                cx = cx.clamp(0.3 * w as f64, 0.7 * w as f64);
                cy = cy.clamp(0.3 * h as f64, 0.7 * h as f64);
            }
            let a = p.major * side * scale;
            let b = (p.major * p.aspect * side * scale * squash).max(0.5);
            let (sin, cos) = angle.sin_cos();
            let edge = 1.2;
            let data = (0..w * h)
                .map(|i| {
                    let dx = (i % w) as f64 + 0.5 - cx;
                    let dy = (i / w) as f64 + 0.5 - cy;
                    let u = (dx * cos + dy * sin) / a;
                    let v = (-dx * sin + dy * cos) / b;
                    let dist = ((u * u + v * v).sqrt() - 1.0) * (a * b).sqrt();
                    let alpha = 0.5 * (1.0 - (dist / edge).tanh());
                    let mut value = p.background + (p.foreground - p.background) * alpha;
                    if spec.noise > 0.0 {
                        value += noise.sample(&mut rng);
                    }
                    value.round().clamp(0.0, 255.0) as u8
                })
                .collect();
            GrayFrame::new(spec.width, spec.height, data).expect("sizes match")
        })
        .collect()
}

/// Parameters and noise seed of sample `index` of `class`, independent of generation order.
pub fn sample_setup(spec: &SyntheticSpec, class: MotionClass, index: usize) -> (SampleParams, u64) {
    let class_id = MotionClass::ALL.iter().position(|&c| c == class).expect("known class") as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, class_id + 1, index as u64 + 1));
    let params = SampleParams::draw(&mut rng);
    (params, rng.random())
}

/// Writes frames, emulated events and `manifest.json` under `out_dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, emulator: &EmulatorConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    spec.validate()?;
    emulator.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir.join("events"))?;
    fs::create_dir_all(out_dir.join("frames"))?;
    let times = spec.frame_times();
    let jobs: Vec<(usize, MotionClass, usize)> = spec
        .classes
        .iter()
        .enumerate()
        .flat_map(|(label, &c)| (0..spec.samples_per_class).map(move |i| (label, c, i)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(label, class, i)| -> Result<ManifestEntry> {
            let id = format!("{}_{i:03}", class.name());
            let (params, noise_seed) = sample_setup(spec, class, i);
            let frames = render_sample(class, &params, spec, noise_seed);
            let frame_dir = PathBuf::from("frames").join(&id);
            fs::create_dir_all(out_dir.join(&frame_dir))?;
            let mut frame_paths = Vec::with_capacity(frames.len());
            for (k, f) in frames.iter().enumerate() {
                let rel = frame_dir.join(format!("{k:03}.pgm"));
                write_frame_pgm(out_dir.join(&rel), f)?;
                frame_paths.push(rel);
            }
            let stream = emulate_sequence(&FrameSequence::new(frames, times.clone())?, emulator)?;
            let events = PathBuf::from("events").join(format!("{id}.evst"));
            write_events(out_dir.join(&events), &stream)?;
            Ok(ManifestEntry {
                id,
                label,
                label_name: class.name().to_string(),
                events,
                frames: frame_paths,
                frame_times_us: times.clone(),
                split: stratified_split(i, spec.samples_per_class, spec.val_fraction),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        classes: spec.classes.iter().map(|c| c.name().to_string()).collect(),
        emulator: emulator.clone(),
        samples,
        base_dir: out_dir.to_path_buf(),
    };
    write_manifest(out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_is_deterministic_and_bright_on_dark() {
        let spec = SyntheticSpec { noise: 0.0, ..Default::default() };
        let (p, seed) = sample_setup(&spec, MotionClass::Expand, 3);
        let a = render_sample(MotionClass::Expand, &p, &spec, seed);
        let b = render_sample(MotionClass::Expand, &p, &spec, seed);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let centre = a[0].get(32, 32);
        let corner = a[0].get(0, 0);
        assert!(centre > 150 && corner < 70, "{centre} {corner}");
        let lit = |f: &GrayFrame| f.data.iter().filter(|&&v| v > 120).count();
        assert!(lit(&a[9]) > lit(&a[0]));
    }

    #[test]
    fn classes_differ() {
        let spec = SyntheticSpec::default();
        let (p, seed) = sample_setup(&spec, MotionClass::Blink, 0);
        let frames: Vec<_> = MotionClass::ALL
            .iter()
            .map(|&c| render_sample(c, &p, &spec, seed))
            .collect();
        for i in 0..7 {
            for j in i + 1..7 {
                assert_ne!(frames[i][9], frames[j][9]);
            }
        }
    }

    #[test]
    fn class_names_round_trip() {
        for c in MotionClass::ALL {
            assert_eq!(c.name().parse::<MotionClass>().unwrap(), c);
        }
        assert!("wobble".parse::<MotionClass>().is_err());
    }
}
