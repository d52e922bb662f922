//! Gaussian-smeared density on a periodic grid, the reciprocal lattice of
//! the box and the transform of the smearing kernel.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::fft3::{forward_1d_real, signed_index};
use crate::trajio::Frame;
use crate::{Error, Result, Vec3};

pub mod io;

pub use io::{read_grid, write_grid, GridHeader, GridKind};

/// Normalized kernel values below this are treated as unresolved.
pub const UNRESOLVED_THRESHOLD: f64 = 1e-6;

/// Floor applied to the kernel spectrum before dividing by it.
pub const KERNEL_FLOOR: f64 = 1e-300;

/// Kernel extent per axis, in grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelWidth {
    /// Smallest odd `k ≥ ceil(10η/δ) + 1`.
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    n_grid: usize,
    box_length: f64,
    eta: f64,
    k: usize,
}

impl GridParams {
    pub fn new(n_grid: usize, box_length: f64, eta: f64, width: KernelWidth) -> Result<Self> {
        if n_grid < 3 {
            return Err(Error::GridParams(format!("N_grid = {n_grid} is below 3")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::GridParams(format!("box length {box_length} must be positive")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::GridParams(format!("η = {eta} must be positive")));
        }
        let spacing = box_length / n_grid as f64;
        let k = match width {
            KernelWidth::Auto => Self::auto_kernel_width(eta, spacing),
            KernelWidth::Fixed(k) => k,
        };
        if k % 2 == 0 {
            return Err(Error::GridParams(format!("kernel width k = {k} must be odd")));
        }
        if k < 3 {
            return Err(Error::GridParams(format!("kernel width k = {k} is below 3")));
        }
        if k > n_grid {
            return Err(Error::GridParams(format!(
                "kernel width k = {k} exceeds N_grid = {n_grid}"
            )));
        }
        Ok(GridParams {
            n_grid,
            box_length,
            eta,
            k,
        })
    }

    /// `η = δ` gives 11.
    pub fn auto_kernel_width(eta: f64, spacing: f64) -> usize {
        // absorb rounding so that exact ratios like 10.000000000000002 stay put
        let span = (10.0 * eta / spacing - 1e-9).ceil().max(0.0) as usize + 1;
        (span | 1).max(3)
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kernel_width(&self) -> usize {
        self.k
    }

    /// Real-space spacing δ = L / N_grid.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n_grid as f64
    }

    pub fn lattice(&self) -> ReciprocalLattice {
        reciprocal_lattice(self)
    }

    pub(crate) fn check_box(&self, box_length: f64) -> Result<()> {
        if (box_length - self.box_length).abs() > 1e-9 * self.box_length {
            return Err(Error::GridMismatch(format!(
                "frame box {box_length} Å differs from grid box {} Å",
                self.box_length
            )));
        }
        Ok(())
    }

    pub fn header(&self, kind: GridKind, method: u32, time: f64) -> GridHeader {
        GridHeader {
            kind,
            n_grid: self.n_grid,
            box_length: self.box_length,
            eta: self.eta,
            k: self.k,
            method,
            time,
        }
    }

    pub fn from_header(h: &GridHeader) -> Result<Self> {
        GridParams::new(h.n_grid, h.box_length, h.eta, KernelWidth::Fixed(h.k))
    }

    /// Same grid geometry, ignoring the smearing settings.
    pub fn same_lattice(&self, other: &GridParams) -> bool {
        self.n_grid == other.n_grid && (self.box_length - other.box_length).abs() <= 1e-12 * self.box_length
    }
}

/// Wavevectors commensurate with the box, indexed in FFT order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReciprocalLattice {
    n: usize,
    box_length: f64,
}

pub fn reciprocal_lattice(params: &GridParams) -> ReciprocalLattice {
    ReciprocalLattice {
        n: params.n_grid,
        box_length: params.box_length,
    }
}

impl ReciprocalLattice {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// 2π/L.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Band edge π·N_grid/L.
    pub fn q_max(&self) -> f64 {
        PI * self.n as f64 / self.box_length
    }

    /// Per-axis components: 0, +, …, Nyquist, −, …
    pub fn axis_frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.component(i)).collect()
    }

    #[inline]
    pub fn component(&self, i: usize) -> f64 {
        signed_index(i, self.n) as f64 * self.spacing()
    }

    #[inline]
    pub fn q_vector(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        [self.component(ix), self.component(iy), self.component(iz)]
    }

    #[inline]
    pub fn q_norm(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        crate::norm(&self.q_vector(ix, iy, iz))
    }

    /// Integer multiples of 2π/L, or `None` when off the lattice.
    pub fn integer_components(q: &Vec3, box_length: f64) -> Option<[i64; 3]> {
        let spacing = 2.0 * PI / box_length;
        let mut m = [0i64; 3];
        for (mi, &qi) in m.iter_mut().zip(q) {
            let x = qi / spacing;
            let r = x.round();
            if (x - r).abs() > 1e-9 * r.abs().max(1.0) {
                return None;
            }
            *mi = r as i64;
        }
        Some(m)
    }

    /// FFT-order index triple of an on-lattice, in-band wavevector.
    pub fn index_of(&self, q: &Vec3) -> Option<[usize; 3]> {
        let m = Self::integer_components(q, self.box_length)?;
        let mut idx = [0usize; 3];
        for (i, &mi) in idx.iter_mut().zip(&m) {
            *i = crate::fft3::fft_index(mi, self.n)?;
        }
        Some(idx)
    }
}

/// ρ^η on an `N_grid³` grid, x fastest, in Å⁻³.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    values: Vec<f64>,
    params: GridParams,
    time: f64,
}

impl DensityGrid {
    pub fn from_values(values: Vec<f64>, params: GridParams, time: f64) -> Result<Self> {
        let n = params.n_grid;
        if values.len() != n * n * n {
            return Err(Error::GridMismatch(format!("{} values for a {n}³ grid", values.len())));
        }
        Ok(DensityGrid { values, params, time })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        let n = self.params.n_grid;
        self.values[ix + n * (iy + n * iz)]
    }

    pub fn header(&self) -> GridHeader {
        self.params.header(GridKind::Density, 0, self.time)
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_grid(&self.header(), &self.values, out)
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let (h, values) = read_grid(input)?;
        if h.kind != GridKind::Density {
            return Err(Error::Format(format!("expected a density grid, found {:?}", h.kind)));
        }
        let params = GridParams::from_header(&h)?;
        DensityGrid::from_values(values, params, h.time)
    }

    /// Σρ·δ³, the number of atoms up to truncation.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.params.spacing().powi(3)
    }
}

/// Grid indices and Gaussian weights of one atom along one axis.
struct Stencil {
    idx: Vec<usize>,
    w: Vec<f64>,
}

fn axis_stencil(x: f64, params: &GridParams) -> Stencil {
    let n = params.n_grid as i64;
    let delta = params.spacing();
    let half = (params.k / 2) as i64;
    let centre = (x / delta).round() as i64;
    let norm = 1.0 / ((2.0 * PI).sqrt() * params.eta);
    let inv2 = 1.0 / (2.0 * params.eta * params.eta);
    let (idx, w) = (centre - half..=centre + half)
        .map(|j| {
            let d = x - j as f64 * delta;
            (j.rem_euclid(n) as usize, norm * (-d * d * inv2).exp())
        })
        .unzip();
    Stencil { idx, w }
}

/// Deposits the frame's atoms; see [`deposit_positions`].
pub fn deposit_density(frame: &Frame, params: &GridParams) -> Result<DensityGrid> {
    params.check_box(frame.box_length())?;
    Ok(deposit_positions(frame.positions(), params, frame.time()))
}

/// Sums a truncated normalized Gaussian of width η per atom over the
/// nearest `k³` nodes with periodic wraparound.
///
/// Work is split over z planes, and each node accumulates atoms in index
/// order, so the result does not depend on the thread count.
pub fn deposit_positions(positions: &[Vec3], params: &GridParams, time: f64) -> DensityGrid {
    let n = params.n_grid;
    let dep = Deposition::new(positions, params);
    let mut values = vec![0.0; n * n * n];
    values
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(iz, plane)| dep.fill_plane(iz, plane));
    DensityGrid {
        values,
        params: *params,
        time,
    }
}

/// Atom stencils grouped by z plane, so the density can be produced one
/// plane at a time without holding the whole grid.
pub struct Deposition {
    n: usize,
    stencils: Vec<[Stencil; 3]>,
    /// Atoms touching each z plane, in atom order, with their z weight.
    by_plane: Vec<Vec<(usize, f64)>>,
}

impl Deposition {
    pub fn new(positions: &[Vec3], params: &GridParams) -> Self {
        let n = params.n_grid;
        let stencils: Vec<[Stencil; 3]> = positions
            .iter()
            .map(|r| {
                [
                    axis_stencil(r[0], params),
                    axis_stencil(r[1], params),
                    axis_stencil(r[2], params),
                ]
            })
            .collect();
        let mut by_plane: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (a, s) in stencils.iter().enumerate() {
            for (&iz, &wz) in s[2].idx.iter().zip(&s[2].w) {
                by_plane[iz].push((a, wz));
            }
        }
        Deposition { n, stencils, by_plane }
    }

    /// Overwrites `plane` (x fastest, length N²) with z plane `iz`.
    pub fn fill_plane(&self, iz: usize, plane: &mut [f64]) {
        let n = self.n;
        assert_eq!(plane.len(), n * n, "plane is not N²");
        plane.fill(0.0);
        for &(a, wz) in &self.by_plane[iz] {
            let [sx, sy, _] = &self.stencils[a];
            for (&iy, &wy) in sy.idx.iter().zip(&sy.w) {
                let row = &mut plane[iy * n..(iy + 1) * n];
                let wyz = wy * wz;
                for (&ix, &wx) in sx.idx.iter().zip(&sx.w) {
                    row[ix] += wx * wyz;
                }
            }
        }
    }
}

/// Transform of one deposited kernel at node 0, f^η(q).
///
/// The kernel is a product of identical 1D factors, so its transform is
/// stored as one real factor per axis and expanded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpectrum {
    params: GridParams,
    axis: Vec<f64>,
    norm0: f64,
}

pub fn gaussian_kernel_spectrum(params: &GridParams) -> KernelSpectrum {
    let n = params.n_grid;
    let st = axis_stencil(0.0, params);
    let mut line = vec![0.0; n];
    for (&i, &w) in st.idx.iter().zip(&st.w) {
        line[i] += w;
    }
    let delta = params.spacing();
    // symmetric about node 0, so the transform is real up to rounding
    let axis: Vec<f64> = forward_1d_real(&line).iter().map(|c| c.re * delta).collect();
    let norm0 = axis[0].powi(3);
    KernelSpectrum {
        params: *params,
        axis,
        norm0,
    }
}

impl KernelSpectrum {
    pub fn params(&self) -> &GridParams {
        &self.params
    }

    /// Per-axis factor in FFT order; f^η = a[ix]·a[iy]·a[iz].
    pub fn axis_factor(&self) -> &[f64] {
        &self.axis
    }

    /// Unnormalized value, the exact transform of a deposited kernel.
    #[inline]
    pub fn raw(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.axis[ix] * self.axis[iy] * self.axis[iz]
    }

    /// Value used as a divisor: the raw value floored at [`KERNEL_FLOOR`].
    #[inline]
    pub fn divisor(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.raw(ix, iy, iz).max(KERNEL_FLOOR)
    }

    /// Normalized so that f^η(0) = 1.
    #[inline]
    pub fn normalized(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.raw(ix, iy, iz) / self.norm0
    }

    #[inline]
    pub fn is_resolved(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.normalized(ix, iy, iz) >= UNRESOLVED_THRESHOLD
    }

    /// Writes the normalized values.
    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_grid(&self.params.header(GridKind::Kernel, 0, 0.0), &self.to_dense(), out)
    }

    /// Normalized values on the full grid, x fastest.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.params.n_grid;
        let mut out = Vec::with_capacity(n * n * n);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    out.push(self.normalized(ix, iy, iz));
                }
            }
        }
        out
    }
}
