//! Python bindings over the pure compute entry points of `evkit`.
//!
//! Arrays cross the boundary as little-endian `bytes` plus a shape, so callers
//! can wrap them with `numpy.frombuffer` without this crate depending on numpy.

use std::path::PathBuf;

use evkit::emulator::{emulate_sequence, EmulatorConfig, FrameSequence, GrayFrame};
use evkit::event::window_by_time;
use evkit::io::read_events;
use evkit::repr::{tie_tensor, tie_to_rgb, TieImage, TieVariant};
use evkit::{EventStream, TimeWindow};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn to_py(e: evkit::Error) -> PyErr {
    match e {
        evkit::Error::Io(_) | evkit::Error::MissingFile(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Column buffers `(t <u8, x <u2, y <u2, p i1, width, height)`.
type EventColumns<'py> = (Bound<'py, PyBytes>, Bound<'py, PyBytes>, Bound<'py, PyBytes>, Bound<'py, PyBytes>, u16, u16);

fn columns<'py>(py: Python<'py>, s: &EventStream) -> EventColumns<'py> {
    let ev = s.events();
    let t: Vec<u8> = ev.iter().flat_map(|e| e.t.to_le_bytes()).collect();
    let x: Vec<u8> = ev.iter().flat_map(|e| e.x.to_le_bytes()).collect();
    let y: Vec<u8> = ev.iter().flat_map(|e| e.y.to_le_bytes()).collect();
    let p: Vec<u8> = ev.iter().map(|e| e.p as u8).collect();
    let g = s.geometry();
    (PyBytes::new(py, &t), PyBytes::new(py, &x), PyBytes::new(py, &y), PyBytes::new(py, &p), g.width, g.height)
}

/// Reads an event file into column buffers.
#[pyfunction]
fn load_events(py: Python<'_>, path: PathBuf) -> PyResult<EventColumns<'_>> {
    let stream = py.detach(|| read_events(&path)).map_err(to_py)?;
    Ok(columns(py, &stream))
}

fn render(window: &TimeWindow<'_>, stream: &EventStream, channels: usize, variant: TieVariant) -> evkit::Result<TieImage> {
    tie_to_rgb(&tie_tensor(window, stream.geometry(), channels, variant)?)
}

/// TIE images of an event file as `(bytes, (windows, 3, height, width))`.
///
/// Without `delta_t_us` the whole stream is one window, as in `evkit represent`.
#[pyfunction]
#[pyo3(signature = (path, variant = "tht", channels = 9, delta_t_us = None, n = 3))]
fn tie<'py>(
    py: Python<'py>,
    path: PathBuf,
    variant: &str,
    channels: usize,
    delta_t_us: Option<u64>,
    n: usize,
) -> PyResult<(Bound<'py, PyBytes>, (usize, usize, u16, u16))> {
    let variant: TieVariant = variant.parse().map_err(to_py)?;
    let (images, g) = py
        .detach(|| -> evkit::Result<_> {
            let stream = read_events(&path)?;
            let images = match delta_t_us {
                None => vec![render(&stream.as_window(), &stream, channels, variant)?],
                Some(dt) => window_by_time(&stream, dt, n)?
                    .iter()
                    .map(|w| render(w, &stream, channels, variant))
                    .collect::<evkit::Result<Vec<_>>>()?,
            };
            Ok((images, stream.geometry()))
        })
        .map_err(to_py)?;
    let data: Vec<u8> = images.iter().flat_map(|im| im.rgb.iter().copied()).collect();
    Ok((PyBytes::new(py, &data), (images.len(), 3, g.height, g.width)))
}

/// Emulates events from `frames` (row-major u8, `len(timestamps) * height * width` bytes).
///
/// `config` may override any emulator field: `threshold_c`, `sigma_threshold`,
/// `timestamp_resolution_us`, `cutoff_hz`, `log_eps`, `exposure_us`, `seed`.
#[pyfunction]
#[pyo3(signature = (frames, width, height, timestamps, config = None))]
fn emulate<'py>(
    py: Python<'py>,
    frames: &[u8],
    width: u16,
    height: u16,
    timestamps: Vec<u64>,
    config: Option<&Bound<'py, PyDict>>,
) -> PyResult<EventColumns<'py>> {
    let mut cfg = serde_json::to_value(EmulatorConfig::default()).expect("config serializes");
    if let Some(overrides) = config {
        for (k, v) in overrides.iter() {
            let key: String = k.extract()?;
            if cfg.get(&key).is_none() {
                return Err(PyValueError::new_err(format!("unknown emulator option '{key}'")));
            }
            let value = if let Ok(i) = v.extract::<u64>() {
                serde_json::Value::from(i)
            } else {
                serde_json::Value::from(v.extract::<f64>()?)
            };
            cfg[&key] = value;
        }
    }
    let cfg: EmulatorConfig = serde_json::from_value(cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let plane = width as usize * height as usize;
    if plane == 0 || frames.len() != plane * timestamps.len() {
        return Err(PyValueError::new_err(format!(
            "frame buffer holds {} bytes, expected {} frames of {width}x{height}",
            frames.len(),
            timestamps.len()
        )));
    }
    let owned = frames.to_vec();
    let stream = py
        .detach(|| -> evkit::Result<EventStream> {
            let frames = owned
                .chunks_exact(plane)
                .map(|c| GrayFrame::new(width, height, c.to_vec()))
                .collect::<evkit::Result<Vec<_>>>()?;
            emulate_sequence(&FrameSequence::new(frames, timestamps)?, &cfg)
        })
        .map_err(to_py)?;
    Ok(columns(py, &stream))
}

#[pymodule]
fn evkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(load_events, m)?)?;
    m.add_function(wrap_pyfunction!(tie, m)?)?;
    m.add_function(wrap_pyfunction!(emulate, m)?)?;
    Ok(())
}
