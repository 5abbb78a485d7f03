//! File formats, manifests, the synthetic corpus and dataset assembly.

pub mod dataset;
pub mod events;
pub mod manifest;
pub mod pnm;
pub mod synth;
pub mod tensor;

pub use dataset::{load_dataset, load_from_manifest, LoadedDataset, LoadedSample, WindowConfig};
pub use events::{read_events, read_events_csv, write_events, write_events_csv, EventFileHeader};
pub use manifest::{read_manifest, write_manifest, Manifest, ManifestEntry, Split};
pub use pnm::{read_frame_pgm, read_image_ppm, write_frame_pgm, write_image_ppm};
pub use synth::{generate_synthetic, MotionClass, SyntheticSpec};
pub use tensor::{read_tensor, write_tensor, TensorF32};
