use std::collections::VecDeque;

use rayon::prelude::*;
use xpcs_core::fft3::{signed_index, HalfLayout};
use xpcs_core::grid::GridParams;
use xpcs_core::scatter::{amplitude_direct_grid, ewald_slice, DetectorImage, FftScatterer, Scattering, SpeckleField};
use xpcs_core::stats::superpose_incoherent;
use xpcs_core::trajio::Frame;

use super::{grid_params, load_trajectory, Flags};
use crate::config::{MethodChoice, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, Table};
use crate::row;

struct FrameFields {
    direct: Option<SpeckleField>,
    fft: Option<SpeckleField>,
}

impl FrameFields {
    fn primary(&self) -> &SpeckleField {
        self.fft
            .as_ref()
            .or(self.direct.as_ref())
            .expect("at least one route ran")
    }
}

fn compute(
    frame: &Frame,
    method: MethodChoice,
    params: &GridParams,
    scatterer: &FftScatterer,
    scattering: &Scattering,
) -> xpcs_core::Result<FrameFields> {
    let direct = match method {
        MethodChoice::Direct | MethodChoice::Both => {
            Some(amplitude_direct_grid(frame, params, scattering)?.into_intensity())
        }
        MethodChoice::Fft => None,
    };
    let fft = match method {
        MethodChoice::Fft | MethodChoice::Both => Some(scatterer.intensity(frame, scattering)?),
        MethodChoice::Direct => None,
    };
    Ok(FrameFields { direct, fft })
}

fn write_field(out: &mut OutputDir, rel: String, field: &SpeckleField) -> CliResult<()> {
    out.write_with(rel, |w| field.write(w).map_err(CliError::from))
}

/// Per-point comparison of the two routes, skipping Nyquist planes and
/// unresolved points.
fn compare(table: &mut Table, frame: usize, params: &GridParams, direct: &SpeckleField, fft: &SpeckleField) {
    let n = params.n_grid();
    let layout = HalfLayout::new(n);
    let lattice = params.lattice();
    let nyquist = |i: usize| n.is_multiple_of(2) && i == n / 2;
    for (slot, (d, f)) in direct.values().iter().zip(fft.values()).enumerate() {
        let (x, y, z) = layout.triple(slot);
        if nyquist(x) || nyquist(y) || nyquist(z) || !f.is_finite() {
            continue;
        }
        let rel = if *d > 0.0 { (f - d).abs() / d } else { f64::NAN };
        table.push(row![
            frame,
            signed_index(x, n),
            signed_index(y, n),
            signed_index(z, n),
            lattice.q_norm(x, y, z),
            *d,
            *f,
            rel
        ]);
    }
}

pub fn speckle(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let traj = load_trajectory(cfg)?;
    let params = grid_params(cfg, traj.box_length())?;
    let scattering = cfg.form_factor.scattering();
    let scatterer = FftScatterer::new(params);
    let method = cfg.method;
    let geometry = cfg.detector.as_ref().map(|d| d.geometry());
    let m = cfg.speckle.superpose.unwrap_or(1);
    let span = (m - 1) * cfg.gap + 1;

    let primary_name = if method == MethodChoice::Direct {
        "direct"
    } else {
        "fft"
    };
    let mut comparison = Table::new(&["frame", "mx", "my", "mz", "q", "i_direct", "i_fft", "rel_err"]);
    let mut frames_table = Table::new(&["frame", "time", "method", "file"]);
    let mut averaged: Vec<DetectorImage> = Vec::new();
    let mut window: VecDeque<SpeckleField> = VecDeque::new();

    // frames are computed in parallel batches and written in order
    let batch = rayon::current_num_threads().max(1);
    let indices: Vec<usize> = (0..traj.n_frames()).collect();
    for chunk in indices.chunks(batch) {
        let computed = chunk
            .par_iter()
            .map(|&i| compute(traj.frame(i), method, &params, &scatterer, &scattering))
            .collect::<xpcs_core::Result<Vec<_>>>()?;
        for (&i, fields) in chunk.iter().zip(computed) {
            if cfg.speckle.write_fields {
                for (name, f) in [("direct", &fields.direct), ("fft", &fields.fft)] {
                    if let Some(f) = f {
                        let rel = format!("fields/{name}/frame_{i:05}.grid");
                        write_field(out, rel.clone(), f)?;
                        frames_table.push(row![i, f.time(), name, rel]);
                    }
                }
            }
            if let (Some(d), Some(f)) = (&fields.direct, &fields.fft) {
                compare(&mut comparison, i, &params, d, f);
            }
            let primary = fields.primary();
            if let Some(g) = &geometry {
                let image = ewald_slice(primary, g)?;
                let det = cfg.detector.as_ref().expect("geometry implies detector");
                if det.per_frame {
                    out.write_with(format!("detector/frame_{i:05}.csv"), |w| {
                        image.write_csv(w).map_err(CliError::from)
                    })?;
                }
                if det.average.is_some_and(|k| i < k) {
                    averaged.push(image);
                }
            }
            if m > 1 {
                window.push_back(primary.clone());
                if window.len() > span {
                    window.pop_front();
                }
                if window.len() == span {
                    let members: Vec<SpeckleField> = window.iter().step_by(cfg.gap).cloned().collect();
                    let sum = superpose_incoherent(&members)?;
                    let start = i + 1 - span;
                    let rel = format!("fields/{primary_name}_m{m}/frame_{start:05}.grid");
                    write_field(out, rel.clone(), &sum)?;
                    frames_table.push(row![start, sum.time(), format!("{primary_name} M={m}"), rel]);
                }
            }
        }
        log::info!(
            "speckle: {} / {} frames",
            chunk.last().map_or(0, |i| i + 1),
            traj.n_frames()
        );
    }

    out.write_csv("frames.csv", &frames_table)?;
    if method == MethodChoice::Both {
        out.write_csv("comparison.csv", &comparison)?;
    }
    if !averaged.is_empty() {
        let mean = DetectorImage::average(&averaged)?;
        out.write_with("detector/average.csv", |w| mean.write_csv(w).map_err(CliError::from))?;
    }
    Ok(Vec::new())
}
