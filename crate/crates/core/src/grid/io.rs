//! Raw binary grid files.
//!
//! Layout, all little-endian: 8-byte magic `XPCSGRID`, u32 version, u32 kind,
//! u64 N_grid, f64 L, f64 η, u64 k, u32 method tag, f64 frame time, then the
//! payload as f64 values with x fastest. Complex payloads interleave re, im.

use std::io::{Read, Write};

use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"XPCSGRID";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    Density,
    Kernel,
    Intensity,
    Amplitude,
}

impl GridKind {
    fn code(self) -> u32 {
        match self {
            GridKind::Density => 0,
            GridKind::Kernel => 1,
            GridKind::Intensity => 2,
            GridKind::Amplitude => 3,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        Ok(match c {
            0 => GridKind::Density,
            1 => GridKind::Kernel,
            2 => GridKind::Intensity,
            3 => GridKind::Amplitude,
            _ => return Err(Error::Format(format!("unknown grid kind {c}"))),
        })
    }

    /// f64 values per grid point.
    pub fn width(self) -> usize {
        match self {
            GridKind::Amplitude => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHeader {
    pub kind: GridKind,
    pub n_grid: usize,
    pub box_length: f64,
    pub eta: f64,
    pub k: usize,
    /// 0 none, 1 direct, 2 fft.
    pub method: u32,
    pub time: f64,
}

impl GridHeader {
    pub fn payload_len(&self) -> usize {
        self.n_grid.pow(3) * self.kind.width()
    }
}

pub fn write_grid<W: Write>(header: &GridHeader, payload: &[f64], mut out: W) -> Result<()> {
    if payload.len() != header.payload_len() {
        return Err(Error::Format(format!(
            "payload has {} values, header implies {}",
            payload.len(),
            header.payload_len()
        )));
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&header.kind.code().to_le_bytes())?;
    out.write_all(&(header.n_grid as u64).to_le_bytes())?;
    out.write_all(&header.box_length.to_le_bytes())?;
    out.write_all(&header.eta.to_le_bytes())?;
    out.write_all(&(header.k as u64).to_le_bytes())?;
    out.write_all(&header.method.to_le_bytes())?;
    out.write_all(&header.time.to_le_bytes())?;
    let mut buf = Vec::with_capacity(payload.len().min(1 << 16) * 8);
    for chunk in payload.chunks(1 << 16) {
        buf.clear();
        chunk.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

fn take<const K: usize, R: Read>(input: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    input.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_grid<R: Read>(mut input: R) -> Result<(GridHeader, Vec<f64>)> {
    if &take::<8, _>(&mut input)? != MAGIC {
        return Err(Error::Format("not a grid file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut input)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported grid file version {version}")));
    }
    let kind = GridKind::from_code(u32::from_le_bytes(take(&mut input)?))?;
    let header = GridHeader {
        kind,
        n_grid: u64::from_le_bytes(take(&mut input)?) as usize,
        box_length: f64::from_le_bytes(take(&mut input)?),
        eta: f64::from_le_bytes(take(&mut input)?),
        k: u64::from_le_bytes(take(&mut input)?) as usize,
        method: u32::from_le_bytes(take(&mut input)?),
        time: f64::from_le_bytes(take(&mut input)?),
    };
    let mut bytes = vec![0u8; header.payload_len() * 8];
    input.read_exact(&mut bytes)?;
    let payload = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, payload))
}
