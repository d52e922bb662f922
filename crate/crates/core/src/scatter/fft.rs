//! Amplitudes on the whole lattice from one FFT of the smeared density.

use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{AmplitudeField, Method, SpeckleField, Support};
use super::form_factor::{resolve, FormFactor, Scattering};
use crate::fft3::{signed_index, RealFft3};
use crate::grid::{
    gaussian_kernel_spectrum, Deposition, GridParams, KernelSpectrum, KERNEL_FLOOR, UNRESOLVED_THRESHOLD,
};
use crate::trajio::Frame;
use crate::{Result, Vec3};

/// Plans and kernel for one grid, reusable across frames.
pub struct FftScatterer {
    params: GridParams,
    kernel: KernelSpectrum,
    fft: RealFft3,
}

impl FftScatterer {
    pub fn new(params: GridParams) -> Self {
        FftScatterer {
            kernel: gaussian_kernel_spectrum(&params),
            fft: RealFft3::new(params.n_grid()),
            params,
        }
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn kernel(&self) -> &KernelSpectrum {
        &self.kernel
    }

    /// p(q) = f(q)/f^η(q) · δ³·FFT[ρ^η](q), one density grid per species.
    /// Points where the kernel is unresolved are NaN.
    pub fn amplitude(&self, frame: &Frame, scattering: &Scattering) -> Result<AmplitudeField> {
        self.params.check_box(frame.box_length())?;
        let groups = resolve(scattering, frame.species())?;
        let positions = frame.positions();
        let mut total: Option<Vec<Complex64>> = None;
        for (ff, idx) in &groups {
            let pos: Vec<Vec3> = if groups.len() == 1 {
                positions.to_vec()
            } else {
                idx.iter().map(|&i| positions[i]).collect()
            };
            let dep = Deposition::new(&pos, &self.params);
            let mut spec = self.fft.forward_planes(|iz, plane| dep.fill_plane(iz, plane));
            self.correct(&mut spec, ff);
            match total.as_mut() {
                None => total = Some(spec),
                Some(t) => t.par_iter_mut().zip(&spec).for_each(|(a, b)| *a += b),
            }
        }
        AmplitudeField::new(
            Support::Grid(self.params),
            total.unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); self.fft.layout().len()]),
            frame.time(),
            Method::Fft,
        )
    }

    pub fn intensity(&self, frame: &Frame, scattering: &Scattering) -> Result<SpeckleField> {
        Ok(self.amplitude(frame, scattering)?.into_intensity())
    }

    fn correct(&self, spec: &mut [Complex64], ff: &FormFactor) {
        let n = self.params.n_grid();
        let h = n / 2 + 1;
        let cell = self.params.spacing().powi(3);
        let table = form_factor_by_m2(ff, n, self.params.box_length());
        let axis = self.kernel.axis_factor();
        let threshold = UNRESOLVED_THRESHOLD * axis[0].powi(3);
        spec.par_chunks_mut(h * n).enumerate().for_each(|(iz, plane)| {
            let mz = signed_index(iz, n);
            for (iy, row) in plane.chunks_mut(h).enumerate() {
                let my = signed_index(iy, n);
                let ayz = axis[iy] * axis[iz];
                for (ix, v) in row.iter_mut().enumerate() {
                    let raw = axis[ix] * ayz;
                    if !(raw >= threshold) {
                        *v = Complex64::new(f64::NAN, f64::NAN);
                        continue;
                    }
                    let mx = ix as i64;
                    let f = table
                        .as_ref()
                        .map_or(1.0, |t| t[(mx * mx + my * my + mz * mz) as usize]);
                    *v *= cell * f / raw.max(KERNEL_FLOOR);
                }
            }
        });
    }
}

/// f tabulated by integer |m|², `None` for the unit form factor.
fn form_factor_by_m2(ff: &FormFactor, n: usize, box_length: f64) -> Option<Vec<f64>> {
    if matches!(ff, FormFactor::Unit) {
        return None;
    }
    let half = (n / 2) as i64;
    let s = 2.0 * std::f64::consts::PI / box_length;
    Some(
        (0..=(3 * half * half) as usize)
            .map(|m2| ff.eval(s * (m2 as f64).sqrt()))
            .collect(),
    )
}

pub fn amplitude_fft(frame: &Frame, params: &GridParams, scattering: &Scattering) -> Result<AmplitudeField> {
    FftScatterer::new(*params).amplitude(frame, scattering)
}

pub fn intensity_fft(frame: &Frame, params: &GridParams, scattering: &Scattering) -> Result<SpeckleField> {
    FftScatterer::new(*params).intensity(frame, scattering)
}
