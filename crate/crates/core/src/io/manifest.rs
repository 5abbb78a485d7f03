use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emulator::EmulatorConfig;
use crate::error::{invalid, Error, Result};
use crate::event::Timestamp;

use super::events::open;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: usize,
    pub label_name: String,
    /// Relative to the manifest's directory.
    pub events: PathBuf,
    pub frames: Vec<PathBuf>,
    pub frame_times_us: Vec<Timestamp>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub classes: Vec<String>,
    /// Settings the event files were generated with.
    pub emulator: EmulatorConfig,
    pub samples: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn split_counts(&self) -> (usize, usize) {
        (self.entries(Split::Train).count(), self.entries(Split::Val).count())
    }

    /// Structural checks; does not touch the file system.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion(self.version as u16));
        }
        let mut ids = std::collections::HashSet::new();
        for s in &self.samples {
            if !ids.insert(&s.id) {
                return Err(invalid(format!("duplicate sample id '{}'", s.id)));
            }
            match self.classes.get(s.label) {
                Some(name) if *name == s.label_name => {}
                _ => {
                    return Err(invalid(format!(
                        "sample '{}': label {} ({}) not in class list",
                        s.id, s.label, s.label_name
                    )))
                }
            }
            if s.frames.len() != s.frame_times_us.len() {
                return Err(invalid(format!(
                    "sample '{}': {} frames but {} frame times",
                    s.id,
                    s.frames.len(),
                    s.frame_times_us.len()
                )));
            }
            if s.frame_times_us.len() < 2 {
                return Err(Error::InsufficientFrames(s.frame_times_us.len()));
            }
            if s.frame_times_us.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(format!("sample '{}': frame times not increasing", s.id)));
            }
        }
        Ok(())
    }

    /// Fails with [`Error::MissingFile`] on the first referenced file that does not exist.
    pub fn check_files(&self) -> Result<()> {
        for s in &self.samples {
            for p in std::iter::once(&s.events).chain(&s.frames) {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::MissingFile(full));
                }
            }
        }
        Ok(())
    }
}

/// Assigns the first `round(n * (1 - val_fraction))` samples of each class to training.
pub fn stratified_split(per_class_index: usize, per_class_total: usize, val_fraction: f64) -> Split {
    let train = ((per_class_total as f64) * (1.0 - val_fraction)).round() as usize;
    if per_class_index < train {
        Split::Train
    } else {
        Split::Val
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let mut m: Manifest = serde_json::from_reader(BufReader::new(open(path)?))?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    m.check_files()?;
    Ok(m)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
