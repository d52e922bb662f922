//! LAMMPS text dump reader (orthogonal cubic boxes only).

use std::collections::HashMap;
use std::io::BufRead;
use std::sync::Arc;

use super::{Frame, Metadata, Trajectory};
use crate::{Error, Result, Vec3};

#[derive(Clone, Debug)]
pub struct DumpOptions {
    /// Integration timestep in ps; frame time = TIMESTEP × this.
    /// Defaults to 1 fs (LAMMPS `metal` units).
    pub timestep_ps: f64,
    /// Optional mapping from numeric atom type to species label.
    pub type_names: HashMap<String, String>,
}

impl Default for DumpOptions {
    fn default() -> Self {
        DumpOptions {
            timestep_ps: 0.001,
            type_names: HashMap::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Coords {
    Wrapped,
    Scaled,
    Unwrapped,
    ScaledUnwrapped,
}

#[derive(Debug)]
struct Layout {
    id: usize,
    kind: Option<usize>,
    pos: [usize; 3],
    coords: Coords,
    image: Option<[usize; 3]>,
    width: usize,
}

impl Layout {
    fn from_header(cols: &[&str], line: usize) -> Result<Layout> {
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let id = find("id").ok_or_else(|| Error::parse(line, "ATOMS columns lack `id`"))?;
        let families = [
            (["x", "y", "z"], Coords::Wrapped),
            (["xs", "ys", "zs"], Coords::Scaled),
            (["xu", "yu", "zu"], Coords::Unwrapped),
            (["xsu", "ysu", "zsu"], Coords::ScaledUnwrapped),
        ];
        let mut found = None;
        for (names, coords) in families {
            let idx = names.map(find);
            match idx {
                [Some(a), Some(b), Some(c)] => {
                    found = Some(([a, b, c], coords));
                    break;
                }
                [None, None, None] => {}
                _ => return Err(Error::parse(line, format!("incomplete coordinate columns {names:?}"))),
            }
        }
        let (pos, coords) =
            found.ok_or_else(|| Error::parse(line, format!("unknown column layout {:?}", cols.join(" "))))?;
        let image = match ["ix", "iy", "iz"].map(find) {
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            [None, None, None] => None,
            _ => return Err(Error::parse(line, "incomplete image flag columns")),
        };
        Ok(Layout {
            id,
            kind: find("type"),
            pos,
            coords,
            image,
            width: cols.len(),
        })
    }
}

struct Lines<R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
    last: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<(usize, String)>> {
        match self.inner.next() {
            None => Ok(None),
            Some((i, l)) => {
                self.last = i + 1;
                Ok(Some((i + 1, l?)))
            }
        }
    }

    fn expect(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_line()?
            .ok_or_else(|| Error::parse(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn expect_item(&mut self, item: &str) -> Result<(usize, String)> {
        let (n, l) = self.expect(item)?;
        let rest = l
            .trim()
            .strip_prefix("ITEM:")
            .map(str::trim)
            .ok_or_else(|| Error::parse(n, format!("expected `ITEM: {item}`")))?;
        if !rest.starts_with(item) {
            return Err(Error::parse(n, format!("expected `ITEM: {item}`, found {l:?}")));
        }
        Ok((n, rest[item.len()..].trim().to_string()))
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("non-numeric {what} {tok:?}")))
}

/// Parses a LAMMPS text dump. Atoms are sorted by id; scaled coordinates
/// are multiplied by L; unwrapped positions are reconstructed from `xu`
/// style columns or from image flags.
pub fn parse_lammps_dump<R: BufRead>(reader: R, options: &DumpOptions) -> Result<Trajectory> {
    let mut lines = Lines {
        inner: reader.lines().enumerate(),
        last: 0,
    };
    let mut frames: Vec<Frame> = Vec::new();
    let mut ids: Option<Vec<u64>> = None;
    let mut species_table: Option<Arc<[String]>> = None;

    loop {
        // skip blank lines; EOF ends the trajectory
        let first = loop {
            match lines.next_line()? {
                None => {
                    return Trajectory::new(
                        frames,
                        Metadata {
                            source: "lammps".into(),
                            seed: None,
                        },
                    )
                }
                Some((n, l)) if !l.trim().is_empty() => break (n, l),
                _ => {}
            }
        };
        if first.1.trim() != "ITEM: TIMESTEP" {
            return Err(Error::parse(first.0, "expected `ITEM: TIMESTEP`"));
        }
        let (n, step) = lines.expect("timestep value")?;
        let step: f64 = parse_num(step.trim(), n, "timestep")?;

        lines.expect_item("NUMBER OF ATOMS")?;
        let (n, count) = lines.expect("atom count")?;
        let n_atoms: usize = parse_num(count.trim(), n, "atom count")?;
        if let Some(first) = frames.first() {
            if n_atoms != first.len() {
                return Err(Error::AtomCountMismatch {
                    frame: frames.len() + 1,
                    expected: first.len(),
                    found: n_atoms,
                });
            }
        }

        let (bounds_line, flags) = lines.expect_item("BOX BOUNDS")?;
        if flags.split_whitespace().any(|f| matches!(f, "xy" | "xz" | "yz")) {
            return Err(Error::UnsupportedGeometry(format!(
                "line {bounds_line}: triclinic box bounds"
            )));
        }
        let mut lo = [0.0; 3];
        let mut len = [0.0; 3];
        for axis in 0..3 {
            let (n, l) = lines.expect("box bounds")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::UnsupportedGeometry(format!(
                    "line {n}: expected `lo hi` box bounds, found {} values",
                    toks.len()
                )));
            }
            let a: f64 = parse_num(toks[0], n, "box bound")?;
            let b: f64 = parse_num(toks[1], n, "box bound")?;
            lo[axis] = a;
            len[axis] = b - a;
        }
        let box_length = len[0];
        if box_length <= 0.0 || len.iter().any(|l| (l - box_length).abs() > 1e-6 * box_length) {
            return Err(Error::UnsupportedGeometry(format!(
                "line {bounds_line}: non-cubic box with edges {len:?}"
            )));
        }

        let (atoms_line, cols) = lines.expect_item("ATOMS")?;
        let cols: Vec<&str> = cols.split_whitespace().collect();
        let layout = Layout::from_header(&cols, atoms_line)?;

        let mut rows: Vec<(u64, String, Vec3, Option<Vec3>)> = Vec::with_capacity(n_atoms);
        for _ in 0..n_atoms {
            let (n, l) = lines.expect("atom row")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() < layout.width {
                return Err(Error::parse(
                    n,
                    format!("expected {} columns, found {}", layout.width, toks.len()),
                ));
            }
            let id: u64 = parse_num(toks[layout.id], n, "atom id")?;
            let kind = layout.kind.map_or("1", |k| toks[k]).to_string();
            let mut r = [0.0; 3];
            for axis in 0..3 {
                let v: f64 = parse_num(toks[layout.pos[axis]], n, "coordinate")?;
                r[axis] = match layout.coords {
                    Coords::Wrapped | Coords::Unwrapped => v - lo[axis],
                    Coords::Scaled | Coords::ScaledUnwrapped => v * box_length,
                };
            }
            let unwrapped = match (layout.coords, layout.image) {
                (Coords::Unwrapped | Coords::ScaledUnwrapped, _) => Some(r),
                (_, Some(img)) => {
                    let mut u = r;
                    for axis in 0..3 {
                        let flag: i64 = parse_num(toks[img[axis]], n, "image flag")?;
                        u[axis] += flag as f64 * box_length;
                    }
                    Some(u)
                }
                _ => None,
            };
            rows.push((id, kind, r, unwrapped));
        }
        rows.sort_by_key(|row| row.0);

        let frame_ids: Vec<u64> = rows.iter().map(|r| r.0).collect();
        match &ids {
            Some(prev) if *prev != frame_ids => {
                return Err(Error::parse(
                    atoms_line,
                    format!("frame {}: atom ids differ from frame 1", frames.len() + 1),
                ))
            }
            Some(_) => {}
            None => ids = Some(frame_ids),
        }
        let species: Vec<String> = rows
            .iter()
            .map(|r| options.type_names.get(&r.1).cloned().unwrap_or_else(|| r.1.clone()))
            .collect();
        let species = match &species_table {
            Some(t) if t[..] == species[..] => t.clone(),
            Some(_) => {
                return Err(Error::parse(
                    atoms_line,
                    format!("frame {}: atom types differ from frame 1", frames.len() + 1),
                ))
            }
            None => {
                let t: Arc<[String]> = species.into();
                species_table = Some(t.clone());
                t
            }
        };

        let time = step * options.timestep_ps;
        let frame = if rows.iter().all(|r| r.3.is_some()) {
            Frame::with_unwrapped(rows.iter().map(|r| r.3.unwrap()).collect(), species, box_length, time)?
        } else {
            Frame::new(rows.iter().map(|r| r.2).collect(), species, box_length, time)?
        };
        frames.push(frame);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dump(step: u64, bounds: &str, cols: &str, rows: &[&str]) -> String {
        let mut s = format!(
            "ITEM: TIMESTEP\n{step}\nITEM: NUMBER OF ATOMS\n{}\nITEM: BOX BOUNDS {bounds}\n",
            rows.len()
        );
        if bounds.contains("xy") {
            s.push_str("0 10 0\n0 10 0\n0 10 0\n");
        } else {
            s.push_str("0 10\n0 10\n0 10\n");
        }
        s.push_str(&format!("ITEM: ATOMS {cols}\n"));
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn image_flags_unwrap() {
        let s = dump(0, "pp pp pp", "id type x y z ix iy iz", &["1 1 1.0 2.0 3.0 1 0 0"]);
        let t = parse_lammps_dump(s.as_bytes(), &DumpOptions::default()).unwrap();
        let u = t.frame(0).unwrapped().unwrap()[0];
        assert!((u[0] - 11.0).abs() < 1e-12);
        assert!((t.frame(0).positions()[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_coordinates_multiply_by_box() {
        let s = dump(0, "pp pp pp", "id type xs ys zs", &["1 1 0.5 0.25 0.0"]);
        let t = parse_lammps_dump(s.as_bytes(), &DumpOptions::default()).unwrap();
        assert_eq!(t.frame(0).positions()[0], [5.0, 2.5, 0.0]);
        assert!(!t.has_unwrapped());
    }

    #[test]
    fn rows_sorted_by_id_and_times_scaled() {
        let mut s = dump(0, "pp pp pp", "id type x y z", &["2 2 2 0 0", "1 1 1 0 0"]);
        s.push_str(&dump(500, "pp pp pp", "id type x y z", &["1 1 1.5 0 0", "2 2 2.5 0 0"]));
        let mut opts = DumpOptions::default();
        opts.type_names.insert("1".into(), "Ar".into());
        let t = parse_lammps_dump(s.as_bytes(), &opts).unwrap();
        assert_eq!(t.species(), &["Ar".to_string(), "2".to_string()]);
        assert_eq!(t.frame(0).positions()[0][0], 1.0);
        assert!((t.frame_interval() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn triclinic_rejected() {
        let s = dump(0, "xy xz yz pp pp pp", "id type x y z", &["1 1 0 0 0"]);
        assert!(matches!(
            parse_lammps_dump(s.as_bytes(), &DumpOptions::default()),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn unknown_layout_rejected() {
        let s = dump(0, "pp pp pp", "id type vx vy vz", &["1 1 0 0 0"]);
        assert!(matches!(
            parse_lammps_dump(s.as_bytes(), &DumpOptions::default()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn unwrapped_columns_kept() {
        let s = dump(0, "pp pp pp", "id type xu yu zu", &["1 1 -3 12 5"]);
        let t = parse_lammps_dump(s.as_bytes(), &DumpOptions::default()).unwrap();
        assert_eq!(t.frame(0).unwrapped().unwrap()[0], [-3.0, 12.0, 5.0]);
        let w = t.frame(0).positions()[0];
        assert!((w[0] - 7.0).abs() < 1e-12 && (w[1] - 2.0).abs() < 1e-12);
    }
}
