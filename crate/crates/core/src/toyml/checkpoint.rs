use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::{init_model, ModelDims, ToyModel};

pub const MAGIC: [u8; 4] = *b"EVTK";
pub const VERSION: u16 = 1;

/// A model plus free-form string metadata (regime, variant, C, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ToyModel,
    pub meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: ModelDims,
    use_lstm: bool,
    meta: BTreeMap<String, String>,
}

/// Layout: magic, u16 version, u32 length + JSON header, u32 tensor count,
/// per tensor (u16 name length, name, u8 rank, u64 dims), then all values as
/// little-endian f64 in table order.
pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        dims: ckpt.model.dims.clone(),
        use_lstm: ckpt.model.use_lstm,
        meta: ckpt.meta.clone(),
    })?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let tensors = ckpt.model.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in &tensors {
        w.write_all(&(t.name.len() as u16).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&[t.shape.len() as u8])?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for t in &tensors {
        for v in t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(format!("checkpoint ended inside {what}")),
        _ => Error::Io(e),
    })
}

fn read_u16<R: Read>(r: &mut R, what: &str) -> Result<u16> {
    let mut b = [0; 2];
    read_exact(r, &mut b, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = read_u16(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let len = read_u32(&mut r, "header length")? as usize;
    let mut header = vec![0; len];
    read_exact(&mut r, &mut header, "header")?;
    let header: Header = serde_json::from_slice(&header)?;
    let mut model = init_model(0, &header.dims)?;
    model.use_lstm = header.use_lstm;

    let count = read_u32(&mut r, "tensor count")? as usize;
    let expected: Vec<(String, Vec<usize>)> = model
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.shape))
        .collect();
    if count != expected.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} tensors", expected.len()),
            actual: format!("{count} tensors"),
        });
    }
    for (name, shape) in &expected {
        let n = read_u16(&mut r, "tensor name length")? as usize;
        let mut buf = vec![0; n];
        read_exact(&mut r, &mut buf, "tensor name")?;
        let mut rank = [0u8];
        read_exact(&mut r, &mut rank, "tensor rank")?;
        let dims = (0..rank[0])
            .map(|_| read_u64(&mut r, "tensor shape").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let got = String::from_utf8_lossy(&buf);
        if got != name.as_str() || &dims != shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{name} {shape:?}"),
                actual: format!("{got} {dims:?}"),
            });
        }
    }
    for (_, t) in model.tensors_mut() {
        for v in t.iter_mut() {
            let mut b = [0; 8];
            read_exact(&mut r, &mut b, "tensor data")?;
            *v = f64::from_le_bytes(b);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::MalformedHeader("trailing bytes after checkpoint data".into()));
    }
    Ok(Checkpoint { model, meta: header.meta })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(ckpt, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_checkpoint(BufReader::new(f))
}
