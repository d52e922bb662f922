//! Native binary trajectory cache.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      8 bytes  "XPCSTRJ1"
//! n_atoms    u64
//! box        f64      L in Å
//! n_frames   u64
//! flags      u32      bit 0: unwrapped block present
//! times      n_frames × f64 (ps)
//! species    n_atoms × (u16 length + UTF-8 bytes)
//! frames     n_frames × { n_atoms × 3 f64 wrapped, [n_atoms × 3 f64 unwrapped] }
//! ```

use std::io::{Read, Write};
use std::sync::Arc;

use super::{Frame, Metadata, Trajectory};
use crate::{Error, Result, Vec3};

const MAGIC: &[u8; 8] = b"XPCSTRJ1";
const FLAG_UNWRAPPED: u32 = 1;

pub fn write_cache<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(traj.n_atoms() as u64).to_le_bytes())?;
    out.write_all(&traj.box_length().to_le_bytes())?;
    out.write_all(&(traj.n_frames() as u64).to_le_bytes())?;
    let flags = if traj.has_unwrapped() { FLAG_UNWRAPPED } else { 0 };
    out.write_all(&flags.to_le_bytes())?;
    for f in traj.frames() {
        out.write_all(&f.time().to_le_bytes())?;
    }
    for s in traj.species() {
        let len = u16::try_from(s.len()).map_err(|_| Error::Format(format!("species label too long: {s:?}")))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(s.as_bytes())?;
    }
    let mut buf = Vec::with_capacity(traj.n_atoms() * 24);
    for f in traj.frames() {
        let mut blocks = vec![f.positions()];
        if let Some(u) = f.unwrapped() {
            blocks.push(u);
        }
        for block in blocks {
            buf.clear();
            for r in block {
                for c in r {
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_block<R: Read>(r: &mut R, n: usize, buf: &mut Vec<u8>) -> Result<Vec<Vec3>> {
    buf.resize(n * 24, 0);
    r.read_exact(buf)?;
    Ok(buf
        .chunks_exact(24)
        .map(|c| {
            let g = |k: usize| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap());
            [g(0), g(1), g(2)]
        })
        .collect())
}

pub fn read_cache<R: Read>(mut input: R) -> Result<Trajectory> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a trajectory cache (bad magic)".into()));
    }
    let n_atoms = read_u64(&mut input)? as usize;
    let box_length = read_f64(&mut input)?;
    let n_frames = read_u64(&mut input)? as usize;
    let mut fb = [0u8; 4];
    input.read_exact(&mut fb)?;
    let flags = u32::from_le_bytes(fb);
    if flags & !FLAG_UNWRAPPED != 0 {
        return Err(Error::Format(format!("unknown cache flags {flags:#x}")));
    }
    let times = (0..n_frames)
        .map(|_| read_f64(&mut input))
        .collect::<Result<Vec<_>>>()?;
    let mut species = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        let mut lb = [0u8; 2];
        input.read_exact(&mut lb)?;
        let mut s = vec![0u8; u16::from_le_bytes(lb) as usize];
        input.read_exact(&mut s)?;
        species.push(String::from_utf8(s).map_err(|_| Error::Format("species label is not UTF-8".into()))?);
    }
    let species: Arc<[String]> = species.into();
    let mut buf = Vec::new();
    let mut frames = Vec::with_capacity(n_frames);
    for time in times {
        let wrapped = read_block(&mut input, n_atoms, &mut buf)?;
        let frame = if flags & FLAG_UNWRAPPED != 0 {
            let unwrapped = read_block(&mut input, n_atoms, &mut buf)?;
            Frame::with_unwrapped(unwrapped, species.clone(), box_length, time)?
        } else {
            Frame::new(wrapped, species.clone(), box_length, time)?
        };
        frames.push(frame);
    }
    Trajectory::new(
        frames,
        Metadata {
            source: "cache".into(),
            seed: None,
        },
    )
}
