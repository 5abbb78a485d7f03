//! Binary and CSV event codecs.
//!
//! Binary layout, little-endian: `"EVST"`, u16 version, u16 width, u16 height,
//! u64 count, then `count` records of (t u64, x u16, y u16, p i8).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, SensorGeometry};

pub const MAGIC: [u8; 4] = *b"EVST";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;
pub const RECORD_LEN: usize = 13;
pub const CSV_HEADER: &str = "t_us,x,y,p";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EventFileHeader {
    pub version: u16,
    pub width: u16,
    pub height: u16,
    pub count: u64,
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn encode_events(stream: &EventStream) -> Vec<u8> {
    let g = stream.geometry();
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&g.width.to_le_bytes());
    out.extend_from_slice(&g.height.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p as u8);
    }
    out
}

pub fn parse_header(bytes: &[u8]) -> Result<EventFileHeader> {
    if bytes.len() < 4 {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("length checked");
    if found != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(EventFileHeader {
        version,
        width: u16_at(6),
        height: u16_at(8),
        count: u64::from_le_bytes(bytes[10..18].try_into().expect("length checked")),
    })
}

pub fn decode_events(bytes: &[u8]) -> Result<EventStream> {
    let header = parse_header(bytes)?;
    let geometry = SensorGeometry::new(header.width, header.height)
        .map_err(|_| Error::MalformedHeader(format!("geometry {}x{}", header.width, header.height)))?;
    let body = &bytes[HEADER_LEN..];
    let needed = header.count as u128 * RECORD_LEN as u128;
    if (body.len() as u128) < needed {
        return Err(Error::Truncated(format!(
            "header declares {} records ({needed} bytes), body holds {} bytes",
            header.count,
            body.len()
        )));
    }
    if body.len() as u128 != needed {
        return Err(Error::CountMismatch {
            declared: header.count,
            actual: body.len().div_ceil(RECORD_LEN) as u64,
        });
    }
    let events = body
        .chunks_exact(RECORD_LEN)
        .map(|r| Event {
            t: u64::from_le_bytes(r[..8].try_into().expect("record length")),
            x: u16::from_le_bytes([r[8], r[9]]),
            y: u16::from_le_bytes([r[10], r[11]]),
            p: r[12] as i8,
        })
        .collect();
    EventStream::new(geometry, events)
}

pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_events(stream))?;
    w.flush()?;
    Ok(())
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let mut bytes = Vec::new();
    open(path.as_ref())?.read_to_end(&mut bytes)?;
    decode_events(&bytes)
}

/// Header only, without reading the records.
pub fn read_event_header(path: impl AsRef<Path>) -> Result<EventFileHeader> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    open(path.as_ref())?.take(HEADER_LEN as u64).read_to_end(&mut buf)?;
    parse_header(&buf)
}

pub fn write_events_csv<W: Write>(stream: &EventStream, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for e in stream.events() {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses CSV events; without a geometry the smallest one holding every event is used.
pub fn read_events_csv<R: BufRead>(r: R, geometry: Option<SensorGeometry>) -> Result<EventStream> {
    let mut lines = r.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(Error::MalformedHeader(format!("expected '{CSV_HEADER}', found '{}'", h.trim()))),
        None => return Err(Error::MalformedHeader("empty CSV".into())),
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::MalformedHeader(format!("line {}: '{line}'", i + 2));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad());
        }
        events.push(Event {
            t: f[0].parse().map_err(|_| bad())?,
            x: f[1].parse().map_err(|_| bad())?,
            y: f[2].parse().map_err(|_| bad())?,
            p: f[3].parse().map_err(|_| bad())?,
        });
    }
    let geometry = match geometry {
        Some(g) => g,
        None => SensorGeometry::new(
            events.iter().map(|e| e.x).max().map_or(1, |x| x.saturating_add(1)),
            events.iter().map(|e| e.y).max().map_or(1, |y| y.saturating_add(1)),
        )?,
    };
    EventStream::new(geometry, events)
}

pub fn read_events_csv_file(path: impl AsRef<Path>, geometry: Option<SensorGeometry>) -> Result<EventStream> {
    read_events_csv(BufReader::new(open(path.as_ref())?), geometry)
}
