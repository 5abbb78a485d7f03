//! Raw tensor dumps: `"EVTN"`, u16 version, u8 dtype (1 = f32), u8 rank,
//! u64 dims, then row-major little-endian f32 values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::events::open;

pub const MAGIC: [u8; 4] = *b"EVTN";
pub const VERSION: u16 = 1;
const DTYPE_F32: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorF32 {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} values for shape {shape:?}"),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }
}

pub fn encode_tensor(t: &TensorF32) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.shape.len() + 4 * t.data.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(t.shape.len() as u8);
    for &d in &t.shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorF32> {
    let short = || Error::Truncated(format!("tensor file of {} bytes", bytes.len()));
    let found: [u8; 4] = bytes.get(..4).ok_or_else(short)?.try_into().expect("4 bytes");
    if found != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found });
    }
    let head = bytes.get(4..8).ok_or_else(short)?;
    let version = u16::from_le_bytes([head[0], head[1]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if head[2] != DTYPE_F32 {
        return Err(Error::MalformedHeader(format!("unknown dtype tag {}", head[2])));
    }
    let rank = head[3] as usize;
    let dims = bytes.get(8..8 + 8 * rank).ok_or_else(short)?;
    let shape: Vec<usize> = dims
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)
        .collect();
    let n = shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::MalformedHeader(format!("shape {shape:?} overflows")))?;
    let body = &bytes[8 + 8 * rank..];
    if body.len() < 4 * n {
        return Err(short());
    }
    if body.len() != 4 * n {
        return Err(Error::CountMismatch {
            declared: n as u64,
            actual: (body.len() / 4) as u64,
        });
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(TensorF32 { shape, data })
}

pub fn write_tensor(path: impl AsRef<Path>, t: &TensorF32) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_tensor(t))?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorF32> {
    let mut bytes = Vec::new();
    open(path.as_ref())?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = TensorF32::new(vec![2, 1, 3], vec![0.5, -1.0, 3.25, f32::MIN_POSITIVE, 0.0, -0.0]).unwrap();
        let b = encode_tensor(&t);
        let back = decode_tensor(&b).unwrap();
        assert_eq!(back.shape, t.shape);
        assert!(back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(matches!(decode_tensor(&b[..b.len() - 2]), Err(Error::Truncated(_))));
        assert!(TensorF32::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
