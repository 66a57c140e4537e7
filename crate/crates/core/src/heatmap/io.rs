//! Binary head-map files.
//!
//! `RTMH`, then `u32` height and width (little endian), then every plane as
//! little-endian `f32`, channel-major and row-major, in the order listed by
//! the plain-text sidecar (`name channels` per line).

use std::io::{Read, Write};

use super::{HeadMaps, HeatmapError, Tensor};

pub const MAGIC: &[u8; 4] = b"RTMH";

const NAMES: [&str; 8] = ["main", "vertex", "vc", "mos", "vos", "dim", "ori", "depth"];

pub fn sidecar_text(maps: &HeadMaps) -> String {
    maps.planes().iter().map(|(n, t)| format!("{n} {}\n", t.channels())).collect()
}

pub fn write_headmaps<W: Write>(maps: &HeadMaps, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(maps.height() as u32).to_le_bytes())?;
    w.write_all(&(maps.width() as u32).to_le_bytes())?;
    let mut buf = Vec::new();
    for (_, t) in maps.planes() {
        buf.clear();
        buf.extend(t.data().iter().flat_map(|v| (*v as f32).to_le_bytes()));
        w.write_all(&buf)?;
    }
    w.flush()
}

fn parse_sidecar(text: &str) -> Result<[usize; 8], HeatmapError> {
    let mut channels = [0; 8];
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    for (i, name) in NAMES.iter().enumerate() {
        let line = lines.next().ok_or_else(|| HeatmapError::Sidecar(format!("missing plane {name}")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(HeatmapError::Sidecar(format!("expected plane {name}, got {line:?}")));
        }
        channels[i] = parts
            .next()
            .and_then(|c| c.parse().ok())
            .filter(|c| *c > 0 && *c <= 1024)
            .ok_or_else(|| HeatmapError::Sidecar(format!("bad channel count in {line:?}")))?;
        if parts.next().is_some() {
            return Err(HeatmapError::Sidecar(format!("trailing fields in {line:?}")));
        }
    }
    if let Some(extra) = lines.next() {
        return Err(HeatmapError::Sidecar(format!("unexpected line {extra:?}")));
    }
    Ok(channels)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, HeatmapError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_headmaps<R: Read>(mut r: R, sidecar: &str) -> Result<HeadMaps, HeatmapError> {
    let channels = parse_sidecar(sidecar)?;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HeatmapError::BadMagic);
    }
    let h = read_u32(&mut r)? as usize;
    let w = read_u32(&mut r)? as usize;
    if h == 0 || w == 0 || h * w > 1 << 24 {
        return Err(HeatmapError::Sidecar(format!("implausible grid {h}x{w}")));
    }
    let mut planes = Vec::with_capacity(8);
    for c in channels {
        let mut bytes = vec![0u8; 4 * c * h * w];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        planes.push(Tensor::from_vec(c, h, w, data)?);
    }
    let mut it = planes.into_iter();
    let mut next = || it.next().expect("eight planes");
    let maps = HeadMaps {
        main: next(),
        vertex: next(),
        vc: next(),
        mos: next(),
        vos: next(),
        dim: next(),
        ori: next(),
        depth: next(),
    };
    maps.validate()?;
    Ok(maps)
}
