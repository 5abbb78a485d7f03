#![allow(dead_code)]

use evkit::emulator::GrayFrame;
use evkit::repr::TimeNorm;
use evkit::toyml::{init_model, CheckSample, ModelDims, ReconPair, Sample, ToyModel};
use evkit::{Event, EventStream, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sorted random events with duplicated timestamps mixed in.
pub fn random_events(rng: &mut impl Rng, count: usize, g: SensorGeometry, t0: u64, span: u64) -> Vec<Event> {
    let mut events: Vec<Event> = (0..count)
        .map(|_| {
            Event::new(
                t0 + rng.random_range(0..=span),
                rng.random_range(0..g.width),
                rng.random_range(0..g.height),
                if rng.random_bool(0.5) { 1 } else { -1 },
            )
        })
        .collect();
    events.sort_by_key(Event::sort_key);
    events
}

pub fn random_stream(rng: &mut impl Rng, count: usize, g: SensorGeometry, t0: u64, span: u64) -> EventStream {
    EventStream::new(g, random_events(rng, count, g, t0, span)).unwrap()
}

pub fn random_frame(rng: &mut impl Rng, w: u16, h: u16) -> GrayFrame {
    let data = (0..w as usize * h as usize).map(|_| rng.random()).collect();
    GrayFrame::new(w, h, data).unwrap()
}

fn normalized(norm: TimeNorm, t: u64, t_lo: u64, t_hi: u64) -> f64 {
    match norm {
        TimeNorm::Tau if t_hi == 0 => 0.0,
        TimeNorm::Tau => t as f64 / t_hi as f64,
        TimeNorm::TauHat if t_hi == t_lo => 0.0,
        TimeNorm::TauHat => (t - t_lo) as f64 / (t_hi - t_lo) as f64,
    }
}

/// Brute force over every (event, voxel) pair: `[polarity][bin][y][x]`, polarity 0 = positive.
pub fn oracle_est(
    events: &[Event],
    g: SensorGeometry,
    bins: usize,
    measurement: Option<TimeNorm>,
    kernel: TimeNorm,
    t_lo: u64,
    t_hi: u64,
) -> Vec<f64> {
    let (w, h) = (g.width as usize, g.height as usize);
    let mut out = vec![0.0; 2 * bins * h * w];
    let spacing = 1.0 / (bins - 1) as f64;
    for pol in 0..2 {
        for b in 0..bins {
            let center = b as f64 * spacing;
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for e in events {
                        let ep = if e.p > 0 { 0 } else { 1 };
                        if ep != pol || e.x as usize != x || e.y as usize != y {
                            continue;
                        }
                        let f = measurement.map_or(1.0, |m| normalized(m, e.t, t_lo, t_hi));
                        let d = (normalized(kernel, e.t, t_lo, t_hi) - center).abs();
                        acc += f * (1.0 - d / spacing).max(0.0);
                    }
                    out[((pol * bins + b) * h + y) * w + x] = acc;
                }
            }
        }
    }
    out
}

/// Signed-polarity TIE channels `[c][y][x]` from the brute-force EST.
pub fn oracle_tie(events: &[Event], g: SensorGeometry, channels: usize, f: TimeNorm, k: TimeNorm) -> Vec<f64> {
    let t_lo = events.first().map_or(0, |e| e.t);
    let t_hi = events.last().map_or(0, |e| e.t);
    let est = oracle_est(events, g, channels, Some(f), k, t_lo, t_hi);
    let half = est.len() / 2;
    (0..half).map(|i| est[i] - est[half + i]).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn check_sample(dims: &ModelDims, seed: u64) -> CheckSample {
    let mut r = rng(seed);
    let mut img = || (0..dims.input()).map(|_| r.random::<f64>()).collect::<Vec<f64>>();
    let windows = vec![img(), img(), img()];
    let input = windows[2].clone();
    let mut r = rng(seed + 1000);
    let target = (0..dims.output()).map(|_| r.random_range(-1.0..1.0)).collect();
    CheckSample {
        recon: ReconPair { input, target },
        class: Sample { windows, label: (seed as usize) % dims.classes },
        recon_weight: 10.0,
    }
}

/// Larger initial weights so activations leave the near-linear regime.
pub fn scaled_model(dims: &ModelDims, seed: u64, gain: f64) -> ToyModel {
    let mut m = init_model(seed, dims).unwrap();
    m.scale(gain);
    m
}

/// Ten small architectures covering both hidden-layer layouts and LSTM on/off.
pub fn small_check_configs() -> Vec<(ModelDims, bool)> {
    (0..10u64)
        .map(|seed| {
            let dims = ModelDims {
                image_side: 4 + (seed as usize % 3),
                encoder_hidden: if seed % 2 == 0 { vec![] } else { vec![12] },
                feature: 6,
                decoder_hidden: vec![10],
                discriminator_hidden: vec![7],
                lstm_hidden: 6,
                classes: 3 + seed as usize % 4,
            };
            (dims, seed % 3 != 0)
        })
        .collect()
}
