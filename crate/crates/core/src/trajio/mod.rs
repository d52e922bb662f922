//! Trajectory ingest: extended-XYZ and LAMMPS text dumps, a native binary
//! cache, synthetic oracle trajectories, tracer selection and MSD.
//!
//! Positions are wrapped into `[0, L)³` on ingest. When the source carries
//! enough information (generator output, `xu` columns, image flags) an
//! unwrapped copy is kept alongside for displacement analysis.

mod cache;
mod generate;
mod lammps;
mod msd;
mod xyz;

use std::sync::Arc;

pub use cache::{read_cache, write_cache};
pub use generate::{generate_brownian, generate_ideal_gas, select_tracers};
pub use lammps::{parse_lammps_dump, DumpOptions};
pub use msd::{mean_square_displacement, MsdCurve, UM2_PER_S_PER_A2_PER_PS};
pub use xyz::{parse_xyz, write_xyz};

use crate::{Error, Result, Vec3};

/// Relative tolerance on uniform frame spacing.
const FRAME_SPACING_RTOL: f64 = 1e-9;

/// Wraps a coordinate into `[0, L)`.
pub fn wrap_coordinate(x: f64, box_length: f64) -> f64 {
    let w = x.rem_euclid(box_length);
    // rem_euclid can round up to exactly L for tiny negative inputs
    if w >= box_length {
        0.0
    } else {
        w
    }
}

fn wrap_all(positions: &[Vec3], box_length: f64) -> Vec<Vec3> {
    positions
        .iter()
        .map(|r| r.map(|x| wrap_coordinate(x, box_length)))
        .collect()
}

/// One snapshot of a cubic periodic box.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    positions: Vec<Vec3>,
    unwrapped: Option<Vec<Vec3>>,
    species: Arc<[String]>,
    box_length: f64,
    time: f64,
}

impl Frame {
    /// Builds a frame from (possibly unwrapped) positions; only the wrapped
    /// view is kept.
    pub fn new(positions: Vec<Vec3>, species: impl Into<Arc<[String]>>, box_length: f64, time: f64) -> Result<Self> {
        let species = species.into();
        check_frame_args(positions.len(), &species, box_length)?;
        Ok(Frame {
            positions: wrap_all(&positions, box_length),
            unwrapped: None,
            species,
            box_length,
            time,
        })
    }

    /// Builds a frame that keeps `unwrapped` and derives the wrapped view.
    pub fn with_unwrapped(
        unwrapped: Vec<Vec3>,
        species: impl Into<Arc<[String]>>,
        box_length: f64,
        time: f64,
    ) -> Result<Self> {
        let species = species.into();
        check_frame_args(unwrapped.len(), &species, box_length)?;
        Ok(Frame {
            positions: wrap_all(&unwrapped, box_length),
            unwrapped: Some(unwrapped),
            species,
            box_length,
            time,
        })
    }

    /// Wrapped positions in `[0, L)³`.
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn unwrapped(&self) -> Option<&[Vec3]> {
        self.unwrapped.as_deref()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number density `N / L³` in Å⁻³.
    pub fn number_density(&self) -> f64 {
        self.len() as f64 / self.box_length.powi(3)
    }

    /// Rigidly shifts every atom by `shift`, rewrapping.
    pub fn translated(&self, shift: Vec3) -> Frame {
        let moved = |v: &[Vec3]| -> Vec<Vec3> {
            v.iter()
                .map(|r| [r[0] + shift[0], r[1] + shift[1], r[2] + shift[2]])
                .collect()
        };
        let unwrapped = self.unwrapped.as_deref().map(moved);
        Frame {
            positions: wrap_all(&moved(&self.positions), self.box_length),
            unwrapped,
            species: self.species.clone(),
            box_length: self.box_length,
            time: self.time,
        }
    }

    /// Keeps only the atoms at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Frame {
        let pick = |v: &[Vec3]| -> Vec<Vec3> { indices.iter().map(|&i| v[i]).collect() };
        let species: Arc<[String]> = indices.iter().map(|&i| self.species[i].clone()).collect();
        Frame {
            positions: pick(&self.positions),
            unwrapped: self.unwrapped.as_deref().map(pick),
            species,
            box_length: self.box_length,
            time: self.time,
        }
    }

    pub(crate) fn with_species(mut self, species: Arc<[String]>) -> Frame {
        debug_assert_eq!(species.len(), self.positions.len());
        self.species = species;
        self
    }
}

fn check_frame_args(n: usize, species: &[String], box_length: f64) -> Result<()> {
    if species.len() != n {
        return Err(Error::invalid(format!(
            "{} species labels for {} positions",
            species.len(),
            n
        )));
    }
    if !(box_length > 0.0 && box_length.is_finite()) {
        return Err(Error::invalid(format!("box length must be positive, got {box_length}")));
    }
    Ok(())
}

/// Where a trajectory came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub source: String,
    pub seed: Option<u64>,
}

/// Ordered frames sharing box, atom count and species ordering.
///
/// Atom identity is index-stable across frames. Frame times are strictly
/// increasing and uniformly spaced; a single-frame trajectory reports a
/// frame interval of zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    frames: Vec<Frame>,
    frame_interval: f64,
    metadata: Metadata,
}

impl Trajectory {
    pub fn new(mut frames: Vec<Frame>, metadata: Metadata) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("trajectory has no frames"))?;
        let (n, box_length) = (first.len(), first.box_length);
        let species = first.species.clone();
        for (i, f) in frames.iter().enumerate().skip(1) {
            if f.len() != n {
                return Err(Error::AtomCountMismatch {
                    frame: i + 1,
                    expected: n,
                    found: f.len(),
                });
            }
            if (f.box_length - box_length).abs() > 1e-9 * box_length {
                return Err(Error::invalid(format!(
                    "frame {}: box length {} differs from {}",
                    i + 1,
                    f.box_length,
                    box_length
                )));
            }
            if !Arc::ptr_eq(&f.species, &species) && f.species[..] != species[..] {
                return Err(Error::invalid(format!(
                    "frame {}: species ordering differs from frame 1",
                    i + 1
                )));
            }
        }
        // share one species table
        for f in frames.iter_mut() {
            f.species = species.clone();
        }

        let frame_interval = if frames.len() > 1 {
            frames[1].time - frames[0].time
        } else {
            0.0
        };
        for (i, w) in frames.windows(2).enumerate() {
            let dt = w[1].time - w[0].time;
            if dt <= 0.0 {
                return Err(Error::invalid(format!(
                    "frame {}: time {} does not increase",
                    i + 2,
                    w[1].time
                )));
            }
            if (dt - frame_interval).abs() > FRAME_SPACING_RTOL * frame_interval {
                return Err(Error::invalid(format!(
                    "frame {}: spacing {} ps differs from frame interval {} ps",
                    i + 2,
                    dt,
                    frame_interval
                )));
            }
        }
        let has_unwrapped = frames[0].unwrapped.is_some();
        if frames.iter().any(|f| f.unwrapped.is_some() != has_unwrapped) {
            return Err(Error::invalid("unwrapped positions present in some frames only"));
        }
        Ok(Trajectory {
            frames,
            frame_interval,
            metadata,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    /// Spacing between consecutive frames in ps (zero for one frame).
    pub fn frame_interval(&self) -> f64 {
        self.frame_interval
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn n_atoms(&self) -> usize {
        self.frames[0].len()
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn box_length(&self) -> f64 {
        self.frames[0].box_length
    }

    pub fn species(&self) -> &[String] {
        &self.frames[0].species
    }

    pub fn has_unwrapped(&self) -> bool {
        self.frames[0].unwrapped.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    /// Restricts every frame to the atoms at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Trajectory> {
        let n = self.n_atoms();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::invalid(format!("atom index {bad} out of range for {n} atoms")));
        }
        let first = self.frames[0].subset(indices);
        let species = first.species.clone();
        let mut frames = vec![first];
        frames.extend(
            self.frames[1..]
                .iter()
                .map(|f| f.subset(indices).with_species(species.clone())),
        );
        Ok(Trajectory {
            frames,
            frame_interval: self.frame_interval,
            metadata: self.metadata.clone(),
        })
    }

    /// Keeps frames `start..end`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Trajectory> {
        if start >= end || end > self.frames.len() {
            return Err(Error::invalid(format!(
                "frame range {start}..{end} invalid for {} frames",
                self.frames.len()
            )));
        }
        Trajectory::new(self.frames[start..end].to_vec(), self.metadata.clone())
    }
}
