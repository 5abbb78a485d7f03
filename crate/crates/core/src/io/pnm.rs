//! Binary PGM (P5) and PPM (P6) with 8-bit samples.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::emulator::GrayFrame;
use crate::error::{Error, Result};
use crate::repr::TieImage;

use super::events::open;

struct Header {
    width: u16,
    height: u16,
    offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::MalformedHeader(format!(
            "expected {}, found '{found}'",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // Whitespace and `#` comments may separate the header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let name = ["width", "height", "maxval"][k];
        if start == pos {
            return Err(Error::MalformedHeader(format!("missing {name}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("{name} out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("no whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if maxval == 0 {
        return Err(Error::MalformedHeader("maxval 0".into()));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(maxval));
    }
    let dim = |v: u32, name: &str| {
        u16::try_from(v)
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::MalformedHeader(format!("{name} {v} outside 1..=65535")))
    };
    Ok(Header {
        width: dim(width, "width")?,
        height: dim(height, "height")?,
        offset: pos,
    })
}

fn body<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    let need = channels * h.width as usize * h.height as usize;
    let data = &bytes[h.offset..];
    if data.len() < need {
        return Err(Error::Truncated(format!("pixel data holds {} of {need} bytes", data.len())));
    }
    Ok(&data[..need])
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    let h = parse_header(bytes, b"P5")?;
    GrayFrame::new(h.width, h.height, body(bytes, &h, 1)?.to_vec())
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<TieImage> {
    let h = parse_header(bytes, b"P6")?;
    TieImage::from_interleaved(h.width, h.height, body(bytes, &h, 3)?)
}

pub fn encode_ppm(image: &TieImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.interleaved());
    out
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame_pgm(path: impl AsRef<Path>) -> Result<GrayFrame> {
    decode_pgm(&read_all(path.as_ref())?)
}

pub fn write_frame_pgm(path: impl AsRef<Path>, frame: &GrayFrame) -> Result<()> {
    write_all(path.as_ref(), &encode_pgm(frame))
}

pub fn read_image_ppm(path: impl AsRef<Path>) -> Result<TieImage> {
    decode_ppm(&read_all(path.as_ref())?)
}

pub fn write_image_ppm(path: impl AsRef<Path>, image: &TieImage) -> Result<()> {
    write_all(path.as_ref(), &encode_ppm(image))
}
