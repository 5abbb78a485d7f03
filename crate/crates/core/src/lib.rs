//! Event-camera processing: frame-to-event emulation, voxel-grid and TIE
//! representations, time-window sequencing, and a small dense network stack for
//! reconstruction pretraining and expression-style sequence classification.

pub mod emulator;
pub mod error;
pub mod event;
pub mod io;
pub mod repr;
pub mod toyml;

pub use error::{Error, Result};
pub use event::{Event, EventStream, SensorGeometry, TimeWindow, Timestamp};
