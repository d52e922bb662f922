//! Subcommand implementations and the data plumbing they share.

mod analysis;
mod bench;
mod generate;
mod speckle;
mod validate;

use std::path::Path;

use xpcs_core::grid::{GridParams, KernelWidth, ReciprocalLattice};
use xpcs_core::scatter::{q_ring_mask, FftScatterer, QRing, SpeckleField, Support};
use xpcs_core::stats::{extract_ring_series, ring_series_direct, ring_series_fft, RingIntensitySeries};
use xpcs_core::trajio::{
    generate_brownian, generate_ideal_gas, parse_lammps_dump, parse_xyz, read_cache, select_tracers, DumpOptions,
    Trajectory,
};

pub use analysis::{contrast, correlate, fit, MIN_RINGS};
pub use bench::bench;
pub use generate::generate;
pub use speckle::speckle;
pub use validate::validate;

use crate::config::{InputSpec, MethodChoice, PipelineConfig, RingSpec};
use crate::error::{CliError, CliResult};

/// Flag messages raised by a command; empty when every fit is clean.
pub type Flags = Vec<String>;

/// Trajectory or precomputed intensity fields.
pub enum Source {
    Trajectory(Trajectory),
    Fields(Vec<SpeckleField>),
}

impl Source {
    pub fn box_length(&self) -> f64 {
        match self {
            Source::Trajectory(t) => t.box_length(),
            Source::Fields(f) => f[0].support().box_length(),
        }
    }
}

fn open(path: &Path) -> CliResult<std::io::BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(std::io::BufReader::new(f))
}

pub fn load_source(cfg: &PipelineConfig) -> CliResult<Source> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::config("an [input] table is required"))?;
    if let InputSpec::Fields { path } = input {
        return load_fields(path).map(Source::Fields);
    }
    load_trajectory(cfg).map(Source::Trajectory)
}

pub fn load_trajectory(cfg: &PipelineConfig) -> CliResult<Trajectory> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::config("an [input] table is required"))?;
    let traj = match input {
        InputSpec::Xyz { path } => parse_xyz(open(path)?)?,
        InputSpec::Lammps {
            path,
            timestep_ps,
            type_names,
        } => {
            let opts = DumpOptions {
                timestep_ps: *timestep_ps,
                type_names: type_names.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            };
            parse_lammps_dump(open(path)?, &opts)?
        }
        InputSpec::Cache { path } => read_cache(open(path)?)?,
        InputSpec::Fields { .. } => {
            return Err(CliError::config("this command needs a trajectory, not speckle fields"));
        }
        InputSpec::Brownian {
            n_atoms,
            box_length,
            diffusivity,
            dt,
            n_frames,
            ..
        } => generate_brownian(*n_atoms, *box_length, *diffusivity, *dt, *n_frames, cfg.seed)?,
        InputSpec::IdealGas {
            n_atoms,
            box_length,
            n_frames,
        } => generate_ideal_gas(*n_atoms, *box_length, *n_frames, cfg.seed)?,
    };
    select(cfg, traj)
}

fn select(cfg: &PipelineConfig, mut traj: Trajectory) -> CliResult<Trajectory> {
    if let Some([start, end]) = cfg.selection.frames {
        traj = traj.slice_frames(start, end)?;
    }
    if let Some(count) = cfg.selection.tracers {
        traj = select_tracers(&traj, count, cfg.seed.wrapping_add(1))?;
    }
    log::info!(
        "trajectory: {} atoms, {} frames, L = {} Å, dt = {} ps",
        traj.n_atoms(),
        traj.n_frames(),
        traj.box_length(),
        traj.frame_interval()
    );
    Ok(traj)
}

/// Every `*.grid` intensity file of `dir`, in file-name order.
fn load_fields(dir: &Path) -> CliResult<Vec<SpeckleField>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "grid"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(xpcs_core::Error::Insufficient(format!(
            "no .grid files in {}",
            dir.display()
        ))));
    }
    let fields = paths
        .iter()
        .map(|p| SpeckleField::read(open(p)?).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    log::info!("read {} speckle fields from {}", fields.len(), dir.display());
    Ok(fields)
}

pub fn grid_params(cfg: &PipelineConfig, box_length: f64) -> CliResult<GridParams> {
    cfg.grid
        .as_ref()
        .ok_or_else(|| CliError::config("a [grid] table is required"))?
        .params(box_length)
}

/// Lattice for ring selection. Without a grid the lattice is sized just
/// past the outermost ring.
fn ring_lattice(cfg: &PipelineConfig, src: &Source) -> CliResult<ReciprocalLattice> {
    let l = src.box_length();
    if let Source::Fields(f) = src {
        return match f[0].support() {
            Support::Grid(p) => Ok(p.lattice()),
            Support::Points { .. } => Err(CliError::config("speckle fields must cover a full grid")),
        };
    }
    if cfg.grid.is_some() {
        return Ok(grid_params(cfg, l)?.lattice());
    }
    let q_top = cfg.rings.iter().map(|r| r.q + r.dq / 2.0).fold(0.0, f64::max);
    let n = ((q_top * l / std::f64::consts::PI).ceil() as usize + 2).max(16);
    let n = n + n % 2;
    let p = GridParams::new(n, l, l / n as f64, KernelWidth::Auto).map_err(|e| CliError::config(e.to_string()))?;
    Ok(p.lattice())
}

pub struct Ring {
    pub index: usize,
    pub spec: RingSpec,
    pub ring: QRing,
    pub series: RingIntensitySeries,
}

impl Ring {
    /// √⟨q²⟩ over the ring's lattice points.
    pub fn q_eff(&self) -> f64 {
        self.ring.mean_q2().sqrt()
    }
}

/// Ring series for every configured ring, with amplitudes when the source
/// is a trajectory. Only one pixel of each ±q pair is kept, so pixel counts
/// and standard errors refer to independent samples.
pub fn ring_series(cfg: &PipelineConfig, src: &Source) -> CliResult<Vec<Ring>> {
    let lattice = ring_lattice(cfg, src)?;
    let rings = cfg
        .rings
        .iter()
        .map(|r| q_ring_mask(&lattice, r.q, r.dq).map(|ring| ring.independent_half()))
        .collect::<xpcs_core::Result<Vec<_>>>()?;
    let scattering = cfg.form_factor.scattering();
    let series: Vec<RingIntensitySeries> = match (src, cfg.method) {
        (Source::Fields(f), _) => rings
            .iter()
            .map(|r| extract_ring_series(f, r))
            .collect::<xpcs_core::Result<_>>()?,
        (Source::Trajectory(t), MethodChoice::Direct) => rings
            .iter()
            .map(|r| ring_series_direct(t, r, &scattering))
            .collect::<xpcs_core::Result<_>>()?,
        (Source::Trajectory(t), _) => {
            let scatterer = FftScatterer::new(grid_params(cfg, t.box_length())?);
            ring_series_fft(t, &scatterer, &rings, &scattering, true)?
        }
    };
    Ok(cfg
        .rings
        .iter()
        .zip(rings)
        .zip(series)
        .enumerate()
        .map(|(index, ((spec, ring), series))| {
            log::info!(
                "ring {index}: q = {} ± {} Å⁻¹, {} pixels",
                spec.q,
                spec.dq / 2.0,
                ring.len()
            );
            Ring {
                index,
                spec: *spec,
                ring,
                series,
            }
        })
        .collect())
}

/// Lags for correlation: from `taus` when given, else `0..=max_lag`.
pub fn lags(cfg: &PipelineConfig, series: &RingIntensitySeries) -> CliResult<Vec<usize>> {
    let n = series.n_frames();
    if n < 2 {
        return Err(CliError::Data(xpcs_core::Error::Insufficient(
            "correlation needs at least two frames".into(),
        )));
    }
    if !cfg.taus.is_empty() {
        let dt = series.frame_interval();
        return cfg
            .taus
            .iter()
            .map(|&t| {
                let lag = (t / dt).round();
                if (lag * dt - t).abs() > 1e-6 * dt.max(t) || lag as usize >= n {
                    Err(CliError::config(format!(
                        "tau = {t} ps is not a multiple of the frame interval {dt} ps within the series"
                    )))
                } else {
                    Ok(lag as usize)
                }
            })
            .collect();
    }
    let max_lag = cfg.max_lag.unwrap_or(n / 2).clamp(1, n - 1);
    Ok((0..=max_lag).collect())
}
