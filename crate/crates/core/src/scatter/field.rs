//! Amplitude and intensity fields on the reciprocal lattice.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::fft3::{fft_index, HalfLayout};
use crate::grid::{read_grid, write_grid, GridKind, GridParams, ReciprocalLattice};
use crate::scatter::ring::QRing;
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Direct,
    Fft,
}

impl Method {
    pub fn code(self) -> u32 {
        match self {
            Method::Direct => 1,
            Method::Fft => 2,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        match c {
            1 => Some(Method::Direct),
            2 => Some(Method::Fft),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Fft => "fft",
        }
    }
}

/// Where a field has values.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Every lattice point of the grid, stored as a half spectrum
    /// (see [`HalfLayout`]).
    Grid(GridParams),
    /// An explicit list of lattice wavevectors.
    Points { box_length: f64, q: Vec<Vec3> },
}

impl Support {
    pub fn box_length(&self) -> f64 {
        match self {
            Support::Grid(p) => p.box_length(),
            Support::Points { box_length, .. } => *box_length,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Support::Grid(p) => HalfLayout::new(p.n_grid()).len(),
            Support::Points { q, .. } => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slots for integer wavevectors, with a conjugation flag per slot.
    pub(crate) fn locate_all(&self, members: &[[i64; 3]]) -> Result<Vec<(usize, bool)>> {
        match self {
            Support::Grid(p) => {
                let n = p.n_grid();
                let layout = HalfLayout::new(n);
                members
                    .iter()
                    .map(|m| {
                        let idx = m.map(|c| fft_index(c, n));
                        match idx {
                            [Some(x), Some(y), Some(z)] => Ok(layout.locate(x, y, z)),
                            _ => Err(Error::GridMismatch(format!(
                                "lattice point {m:?} is outside the {n}³ grid"
                            ))),
                        }
                    })
                    .collect()
            }
            Support::Points { box_length, q } => {
                let lookup: HashMap<[i64; 3], usize> = q
                    .iter()
                    .enumerate()
                    .filter_map(|(i, v)| ReciprocalLattice::integer_components(v, *box_length).map(|m| (m, i)))
                    .collect();
                members
                    .iter()
                    .map(|m| {
                        if let Some(&i) = lookup.get(m) {
                            Ok((i, false))
                        } else if let Some(&i) = lookup.get(&m.map(|c| -c)) {
                            Ok((i, true))
                        } else {
                            Err(Error::GridMismatch(format!(
                                "lattice point {m:?} is not among the field's wavevectors"
                            )))
                        }
                    })
                    .collect()
            }
        }
    }

    fn check_ring(&self, ring: &QRing) -> Result<()> {
        let l = self.box_length();
        if (l - ring.box_length()).abs() > 1e-9 * l {
            return Err(Error::GridMismatch(format!(
                "ring built for L = {} Å, field has L = {l} Å",
                ring.box_length()
            )));
        }
        Ok(())
    }
}

/// Complex amplitude p(q) of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeField {
    support: Support,
    values: Vec<Complex64>,
    time: f64,
    method: Method,
}

/// Intensity I(q) = |p(q)|² of one frame (or a superposition).
#[derive(Clone, Debug, PartialEq)]
pub struct SpeckleField {
    support: Support,
    values: Vec<f64>,
    time: f64,
    method: Method,
}

impl AmplitudeField {
    pub fn new(support: Support, values: Vec<Complex64>, time: f64, method: Method) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a support of {}",
                values.len(),
                support.len()
            )));
        }
        Ok(AmplitudeField {
            support,
            values,
            time,
            method,
        })
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Raw storage; half spectrum for grid support.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Value at an FFT-order index triple of a grid field.
    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> Option<Complex64> {
        let Support::Grid(p) = &self.support else {
            return None;
        };
        let (slot, conj) = HalfLayout::new(p.n_grid()).locate(ix, iy, iz);
        let v = self.values[slot];
        Some(if conj { v.conj() } else { v })
    }

    /// Value at a wavevector, if the field covers it.
    pub fn at_q(&self, q: &Vec3) -> Option<Complex64> {
        let m = ReciprocalLattice::integer_components(q, self.support.box_length())?;
        let (slot, conj) = self.support.locate_all(&[m]).ok()?[0];
        let v = self.values[slot];
        Some(if conj { v.conj() } else { v })
    }

    pub fn intensity(&self) -> SpeckleField {
        SpeckleField {
            support: self.support.clone(),
            values: self.values.iter().map(|p| p.norm_sqr()).collect(),
            time: self.time,
            method: self.method,
        }
    }

    pub fn into_intensity(self) -> SpeckleField {
        let values = self.values.iter().map(|p| p.norm_sqr()).collect();
        SpeckleField {
            support: self.support,
            values,
            time: self.time,
            method: self.method,
        }
    }

    /// Ring members in ring order.
    pub fn gather(&self, ring: &QRing) -> Result<Vec<Complex64>> {
        self.support.check_ring(ring)?;
        Ok(self
            .support
            .locate_all(ring.members())?
            .into_iter()
            .map(|(s, conj)| if conj { self.values[s].conj() } else { self.values[s] })
            .collect())
    }

    /// Full-grid file with interleaved re, im.
    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let Support::Grid(p) = &self.support else {
            return Err(Error::Format("only grid fields can be written".into()));
        };
        let dense: Vec<f64> = dense(p.n_grid(), |x, y, z| self.at(x, y, z).expect("grid support"))
            .into_iter()
            .flat_map(|c| [c.re, c.im])
            .collect();
        write_grid(
            &p.header(GridKind::Amplitude, self.method.code(), self.time),
            &dense,
            out,
        )
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let (h, payload) = read_grid(input)?;
        if h.kind != GridKind::Amplitude {
            return Err(Error::Format(format!("expected an amplitude grid, found {:?}", h.kind)));
        }
        let params = GridParams::from_header(&h)?;
        let method = method_from(h.method)?;
        let values = halve(h.n_grid, |i| Complex64::new(payload[2 * i], payload[2 * i + 1]));
        AmplitudeField::new(Support::Grid(params), values, h.time, method)
    }
}

impl SpeckleField {
    pub fn new(support: Support, values: Vec<f64>, time: f64, method: Method) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a support of {}",
                values.len(),
                support.len()
            )));
        }
        Ok(SpeckleField {
            support,
            values,
            time,
            method,
        })
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> Option<f64> {
        let Support::Grid(p) = &self.support else {
            return None;
        };
        Some(self.values[HalfLayout::new(p.n_grid()).locate(ix, iy, iz).0])
    }

    pub fn at_q(&self, q: &Vec3) -> Option<f64> {
        let m = ReciprocalLattice::integer_components(q, self.support.box_length())?;
        let (slot, _) = self.support.locate_all(&[m]).ok()?[0];
        Some(self.values[slot])
    }

    pub fn gather(&self, ring: &QRing) -> Result<Vec<f64>> {
        self.support.check_ring(ring)?;
        Ok(self
            .support
            .locate_all(ring.members())?
            .into_iter()
            .map(|(s, _)| self.values[s])
            .collect())
    }

    /// Pixel-wise sum with another field on the same support.
    pub fn add_assign(&mut self, other: &SpeckleField) -> Result<()> {
        if self.support != other.support {
            return Err(Error::GridMismatch("fields have different supports".into()));
        }
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let Support::Grid(p) = &self.support else {
            return Err(Error::Format("only grid fields can be written".into()));
        };
        let dense = dense(p.n_grid(), |x, y, z| self.at(x, y, z).expect("grid support"));
        write_grid(
            &p.header(GridKind::Intensity, self.method.code(), self.time),
            &dense,
            out,
        )
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let (h, payload) = read_grid(input)?;
        if h.kind != GridKind::Intensity {
            return Err(Error::Format(format!("expected an intensity grid, found {:?}", h.kind)));
        }
        let params = GridParams::from_header(&h)?;
        let method = method_from(h.method)?;
        let values = halve(h.n_grid, |i| payload[i]);
        SpeckleField::new(Support::Grid(params), values, h.time, method)
    }
}

fn method_from(code: u32) -> Result<Method> {
    Method::from_code(code).ok_or_else(|| Error::Format(format!("unknown method tag {code}")))
}

fn dense<T>(n: usize, f: impl Fn(usize, usize, usize) -> T) -> Vec<T> {
    let mut out = Vec::with_capacity(n * n * n);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                out.push(f(x, y, z));
            }
        }
    }
    out
}

/// Keeps the stored half of a dense x-fastest grid.
fn halve<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    let layout = HalfLayout::new(n);
    (0..layout.len())
        .map(|slot| {
            let (x, y, z) = layout.triple(slot);
            f(x + n * (y + n * z))
        })
        .collect()
}
