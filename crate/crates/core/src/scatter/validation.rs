//! Pair distribution g(r) and orientation-averaged S(q).

use rayon::prelude::*;

use super::form_factor::{resolve, sum_f_squared, Scattering};
use super::{FftScatterer, SpeckleField, Support};
use crate::fft3::signed_index;
use crate::grid::GridParams;
use crate::trajio::{Frame, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PairDistribution {
    /// Bin centres, Å.
    pub r: Vec<f64>,
    pub g: Vec<f64>,
}

/// Minimum-image histogram of pair distances, normalized by the ideal-gas
/// shell count N·ρ₀·V_shell/2 and averaged over frames.
pub fn pair_distribution(traj: &Trajectory, r_max: f64, n_bins: usize) -> Result<PairDistribution> {
    let l = traj.box_length();
    if !(r_max > 0.0 && r_max <= l / 2.0) {
        return Err(Error::invalid(format!(
            "r_max = {r_max} Å must lie in (0, L/2 = {} Å]",
            l / 2.0
        )));
    }
    if n_bins == 0 {
        return Err(Error::invalid("g(r) needs at least one bin"));
    }
    let width = r_max / n_bins as f64;
    let counts = traj
        .frames()
        .par_iter()
        .map(|f| pair_histogram(f.positions(), l, r_max, width, n_bins))
        .reduce(
            || vec![0u64; n_bins],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = traj.n_atoms() as f64;
    let rho = n / l.powi(3);
    let frames = traj.n_frames() as f64;
    let (r, g) = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (r0, r1) = (i as f64 * width, (i + 1) as f64 * width);
            let shell = 4.0 / 3.0 * std::f64::consts::PI * (r1.powi(3) - r0.powi(3));
            (0.5 * (r0 + r1), 2.0 * c as f64 / (frames * n * rho * shell))
        })
        .unzip();
    Ok(PairDistribution { r, g })
}

fn pair_histogram(pos: &[crate::Vec3], l: f64, r_max: f64, width: f64, n_bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; n_bins];
    let r2_max = r_max * r_max;
    for (i, a) in pos.iter().enumerate() {
        for b in &pos[i + 1..] {
            let mut d2 = 0.0;
            for k in 0..3 {
                let d = a[k] - b[k];
                let d = d - l * (d / l).round();
                d2 += d * d;
            }
            if d2 < r2_max {
                let bin = ((d2.sqrt() / width) as usize).min(n_bins - 1);
                h[bin] += 1;
            }
        }
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureFactor {
    /// Bin centres, Å⁻¹.
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    /// Lattice points per bin, summed over frames.
    pub counts: Vec<u64>,
}

/// Streams grid speckle fields into |q| bins of I(q)/Σᵢfᵢ(q)².
#[derive(Clone, Debug)]
pub struct SqAccumulator {
    params: GridParams,
    edges: Vec<f64>,
    sum: Vec<f64>,
    counts: Vec<u64>,
}

impl SqAccumulator {
    /// `edges` must be strictly increasing; q = 0 is always excluded.
    pub fn new(params: GridParams, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("q bin edges must be strictly increasing, at least two"));
        }
        let bins = edges.len() - 1;
        Ok(SqAccumulator {
            params,
            edges,
            sum: vec![0.0; bins],
            counts: vec![0; bins],
        })
    }

    /// Adds one field computed from `frame`.
    pub fn add(&mut self, field: &SpeckleField, frame: &Frame, scattering: &Scattering) -> Result<()> {
        let Support::Grid(p) = field.support() else {
            return Err(Error::invalid("S(q) averaging needs a field on the full grid"));
        };
        if !p.same_lattice(&self.params) {
            return Err(Error::GridMismatch("field grid differs from the accumulator's".into()));
        }
        let groups = resolve(scattering, frame.species())?;
        let n = p.n_grid();
        let h = n / 2 + 1;
        let s = p.lattice().spacing();
        let half = (n / 2) as i64;
        let norm: Vec<f64> = (0..=(3 * half * half) as usize)
            .map(|m2| sum_f_squared(&groups, s * (m2 as f64).sqrt()))
            .collect();
        let edges = &self.edges;
        let bins = edges.len() - 1;
        let parts: Vec<(Vec<f64>, Vec<u64>)> = field
            .values()
            .par_chunks(h * n)
            .enumerate()
            .map(|(iz, plane)| {
                let mut sum = vec![0.0; bins];
                let mut cnt = vec![0u64; bins];
                let mz = signed_index(iz, n);
                for (iy, row) in plane.chunks(h).enumerate() {
                    let my = signed_index(iy, n);
                    for (ix, &v) in row.iter().enumerate() {
                        let m2 = (ix * ix) as i64 + my * my + mz * mz;
                        if m2 == 0 || v.is_nan() {
                            continue;
                        }
                        let q = s * (m2 as f64).sqrt();
                        let Some(b) = bin_of(edges, q) else { continue };
                        // stored slots off the kx = 0 and Nyquist planes stand for a ±q pair
                        let w = if ix == 0 || (n % 2 == 0 && ix == n / 2) { 1 } else { 2 };
                        sum[b] += w as f64 * v / norm[m2 as usize];
                        cnt[b] += w;
                    }
                }
                (sum, cnt)
            })
            .collect();
        for (sum, cnt) in parts {
            self.sum.iter_mut().zip(&sum).for_each(|(a, b)| *a += b);
            self.counts.iter_mut().zip(&cnt).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    pub fn finish(&self) -> StructureFactor {
        let q = self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let s = self
            .sum
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
        StructureFactor {
            q,
            s,
            counts: self.counts.clone(),
        }
    }
}

fn bin_of(edges: &[f64], q: f64) -> Option<usize> {
    if q < edges[0] || q >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= q) - 1)
}

/// S(q) of a trajectory by the FFT route, averaged over frames.
pub fn structure_factor_angular_avg(
    traj: &Trajectory,
    params: &GridParams,
    scattering: &Scattering,
    edges: Vec<f64>,
) -> Result<StructureFactor> {
    let scatterer = FftScatterer::new(*params);
    let mut acc = SqAccumulator::new(*params, edges)?;
    for frame in traj.frames() {
        let field = scatterer.intensity(frame, scattering)?;
        acc.add(&field, frame, scattering)?;
    }
    Ok(acc.finish())
}
