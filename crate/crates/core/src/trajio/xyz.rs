//! Extended-XYZ reader and writer.
//!
//! Each frame is a count line, a comment line of `key=value` tokens and one
//! `species x y z` row per atom. The comment must carry the cubic box as
//! `Lattice="L 0 0 0 L 0 0 0 L"` (three diagonal values are accepted too).
//! `Time=<ps>` sets the frame time; without it frames are spaced 1 ps apart.
//! `Unwrapped=T` marks coordinates as unwrapped so they are kept for MSD.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{Frame, Metadata, Trajectory};
use crate::{Error, Result, Vec3};

pub fn parse_xyz<R: BufRead>(reader: R) -> Result<Trajectory> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut frames: Vec<Frame> = Vec::new();
    let mut species_table: Option<Arc<[String]>> = None;

    loop {
        // count line, skipping blank separators
        let (count_line, count_text) = loop {
            match lines.next() {
                None => {
                    return Trajectory::new(
                        frames,
                        Metadata {
                            source: "xyz".into(),
                            seed: None,
                        },
                    )
                }
                Some((n, text)) => {
                    let text = text?;
                    if !text.trim().is_empty() {
                        break (n, text);
                    }
                }
            }
        };
        let n_atoms: usize = count_text
            .trim()
            .parse()
            .map_err(|_| Error::parse(count_line, format!("malformed atom count {:?}", count_text.trim())))?;
        if let Some(first) = frames.first() {
            if n_atoms != first.len() {
                return Err(Error::AtomCountMismatch {
                    frame: frames.len() + 1,
                    expected: first.len(),
                    found: n_atoms,
                });
            }
        }

        let (comment_line, comment) = match lines.next() {
            Some((n, text)) => (n, text?),
            None => return Err(Error::parse(count_line + 1, "missing comment line")),
        };
        let header = parse_comment(&comment, comment_line)?;
        let box_length = header
            .box_length
            .ok_or_else(|| Error::parse(comment_line, "missing box length (Lattice=...)"))?;
        let time = header.time.unwrap_or(frames.len() as f64);

        let mut positions = Vec::with_capacity(n_atoms);
        let mut species = Vec::with_capacity(n_atoms);
        for k in 0..n_atoms {
            let (line_no, text) = match lines.next() {
                Some((n, text)) => (n, text?),
                None => {
                    return Err(Error::parse(
                        comment_line + k + 1,
                        format!(
                            "frame {}: expected {} atom rows, found {}",
                            frames.len() + 1,
                            n_atoms,
                            k
                        ),
                    ))
                }
            };
            let mut fields = text.split_whitespace();
            let name = fields.next().ok_or_else(|| Error::parse(line_no, "empty atom row"))?;
            let mut r = [0.0; 3];
            for c in r.iter_mut() {
                let tok = fields
                    .next()
                    .ok_or_else(|| Error::parse(line_no, "atom row needs species and three coordinates"))?;
                *c = tok
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("non-numeric coordinate {tok:?}")))?;
            }
            species.push(name.to_string());
            positions.push(r);
        }

        let species: Arc<[String]> = match &species_table {
            Some(t) if t[..] == species[..] => t.clone(),
            Some(_) => {
                return Err(Error::parse(
                    comment_line,
                    format!("frame {}: species ordering differs from frame 1", frames.len() + 1),
                ))
            }
            None => {
                let t: Arc<[String]> = species.into();
                species_table = Some(t.clone());
                t
            }
        };
        let frame = if header.unwrapped {
            Frame::with_unwrapped(positions, species, box_length, time)?
        } else {
            Frame::new(positions, species, box_length, time)?
        };
        frames.push(frame);
    }
}

struct Header {
    box_length: Option<f64>,
    time: Option<f64>,
    unwrapped: bool,
}

fn parse_comment(comment: &str, line: usize) -> Result<Header> {
    let mut header = Header {
        box_length: None,
        time: None,
        unwrapped: false,
    };
    for (key, value) in key_values(comment) {
        match key.to_ascii_lowercase().as_str() {
            "lattice" => header.box_length = Some(parse_lattice(&value, line)?),
            "time" => {
                header.time = Some(
                    value
                        .parse()
                        .map_err(|_| Error::parse(line, format!("non-numeric time {value:?}")))?,
                )
            }
            "unwrapped" => header.unwrapped = matches!(value.as_str(), "T" | "t" | "true" | "True" | "1"),
            _ => {}
        }
    }
    Ok(header)
}

fn parse_lattice(value: &str, line: usize) -> Result<f64> {
    let nums: Vec<f64> = value
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(line, format!("non-numeric lattice {value:?}")))?;
    let diag = match nums.len() {
        3 => [nums[0], nums[1], nums[2]],
        9 => {
            let off = [nums[1], nums[2], nums[3], nums[5], nums[6], nums[7]];
            if off.iter().any(|x| x.abs() > 1e-12) {
                return Err(Error::UnsupportedGeometry(format!(
                    "line {line}: non-orthogonal lattice"
                )));
            }
            [nums[0], nums[4], nums[8]]
        }
        n => return Err(Error::parse(line, format!("lattice needs 3 or 9 numbers, found {n}"))),
    };
    let l = diag[0];
    if diag.iter().any(|d| (d - l).abs() > 1e-9 * l.abs()) {
        return Err(Error::UnsupportedGeometry(format!(
            "line {line}: non-cubic box {diag:?}"
        )));
    }
    if l <= 0.0 {
        return Err(Error::parse(line, "box length must be positive"));
    }
    Ok(l)
}

/// Splits `a=1 b="x y" c` into key/value pairs; bare words get an empty value.
fn key_values(s: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        let mut value = String::new();
        if chars.peek() == Some(&'=') {
            chars.next();
            if chars.peek() == Some(&'"') {
                chars.next();
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    value.push(c);
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    value.push(c);
                    chars.next();
                }
            }
        }
        out.push((key, value));
    }
    out
}

/// Writes `traj` as extended XYZ. With `unwrapped` set (and available) the
/// unwrapped coordinates are written and flagged.
pub fn write_xyz<W: Write>(traj: &Trajectory, mut out: W, unwrapped: bool) -> Result<()> {
    let use_unwrapped = unwrapped && traj.has_unwrapped();
    let l = traj.box_length();
    for frame in traj.frames() {
        writeln!(out, "{}", frame.len())?;
        write!(
            out,
            "Lattice=\"{l} 0 0 0 {l} 0 0 0 {l}\" Properties=species:S:1:pos:R:3 Time={}",
            frame.time()
        )?;
        if use_unwrapped {
            write!(out, " Unwrapped=T")?;
        }
        writeln!(out)?;
        let coords: &[Vec3] = if use_unwrapped {
            frame.unwrapped().unwrap_or(frame.positions())
        } else {
            frame.positions()
        };
        for (s, r) in frame.species().iter().zip(coords) {
            writeln!(out, "{s} {} {} {}", r[0], r[1], r[2])?;
        }
    }
    Ok(())
}
