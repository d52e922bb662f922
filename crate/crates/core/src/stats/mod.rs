//! Speckle statistics over a q ring: g2, F(q,τ), contrast, exposure
//! integration, incoherent superposition and intensity histograms.

use num_complex::Complex64;

use crate::scatter::form_factor::{resolve, sum_f_squared, Scattering};
use crate::scatter::{AmplitudeField, QRing, SpeckleField};
use crate::trajio::Frame;
use crate::{Error, Result};

mod contrast;
mod correlate;
mod histogram;

pub use contrast::{
    contrast_from_isf, contrast_ring, contrast_ring_series, contrast_time, contrast_vs_exposure,
    diffusive_contrast_factor, integrate_exposure, isf_contrast_curve, superpose_incoherent, superpose_independent,
    superpose_time_separated, ContrastCurve, ContrastEstimate, ContrastMethod, Sources,
};
pub use correlate::{
    g2, g2_lags, intermediate_scattering, intermediate_scattering_lags, siegert_check, siegert_convergence,
    CorrelationResult, IsfResult, SiegertPoint, SiegertReport,
};
pub use histogram::{erlang_chi_square, erlang_pdf, intensity_histogram, ChiSquare, HistogramFit};

/// Per-frame samples over the pixels of one ring, frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RingIntensitySeries {
    times: Vec<f64>,
    dt: f64,
    n_pix: usize,
    intensity: Vec<f64>,
    amplitude: Option<Vec<Complex64>>,
    norm: Vec<f64>,
    m: usize,
}

impl RingIntensitySeries {
    /// `intensity` holds `times.len()` rows of `n_pix` values.
    pub fn from_rows(times: Vec<f64>, n_pix: usize, intensity: Vec<f64>) -> Result<Self> {
        let dt = frame_interval(&times)?;
        if n_pix == 0 {
            return Err(Error::Insufficient("ring series needs at least one pixel".into()));
        }
        if intensity.len() != times.len() * n_pix {
            return Err(Error::GridMismatch(format!(
                "{} values for {} frames × {n_pix} pixels",
                intensity.len(),
                times.len()
            )));
        }
        if intensity.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("intensities must be finite and non-negative"));
        }
        Ok(RingIntensitySeries {
            times,
            dt,
            n_pix,
            intensity,
            amplitude: None,
            norm: vec![1.0; n_pix],
            m: 1,
        })
    }

    /// Amplitude rows; intensities are their squared moduli.
    pub fn from_amplitudes(times: Vec<f64>, n_pix: usize, amplitude: Vec<Complex64>) -> Result<Self> {
        let intensity = amplitude.iter().map(|p| p.norm_sqr()).collect();
        let mut s = Self::from_rows(times, n_pix, intensity)?;
        s.amplitude = Some(amplitude);
        Ok(s)
    }

    /// Per-pixel Σᵢfᵢ(q)², the normalization of F(q,τ).
    pub fn with_norm(mut self, norm: Vec<f64>) -> Result<Self> {
        if norm.len() != self.n_pix || norm.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("normalization needs one positive value per pixel"));
        }
        self.norm = norm;
        Ok(self)
    }

    pub(crate) fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// 0 for a single frame.
    pub fn frame_interval(&self) -> f64 {
        self.dt
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pix
    }

    /// Incoherent superposition count.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensity
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.intensity[t * self.n_pix..(t + 1) * self.n_pix]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.intensity.chunks(self.n_pix)
    }

    pub fn pixel(&self, p: usize) -> Vec<f64> {
        self.intensity.iter().skip(p).step_by(self.n_pix).copied().collect()
    }

    pub fn has_amplitudes(&self) -> bool {
        self.amplitude.is_some()
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        self.amplitude.as_deref()
    }

    pub(crate) fn amplitude_pixel(&self, p: usize) -> Option<Vec<Complex64>> {
        self.amplitude
            .as_ref()
            .map(|a| a.iter().skip(p).step_by(self.n_pix).copied().collect())
    }

    pub fn norm(&self) -> &[f64] {
        &self.norm
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_frames() {
            return Err(Error::invalid(format!(
                "frame range {start}..{end} outside 0..{}",
                self.n_frames()
            )));
        }
        let (a, b) = (start * self.n_pix, end * self.n_pix);
        Ok(RingIntensitySeries {
            times: self.times[start..end].to_vec(),
            dt: self.dt,
            n_pix: self.n_pix,
            intensity: self.intensity[a..b].to_vec(),
            amplitude: self.amplitude.as_ref().map(|v| v[a..b].to_vec()),
            norm: self.norm.clone(),
            m: self.m,
        })
    }

    /// Same samples in reverse time order.
    pub fn reversed(&self) -> Self {
        let rev = |v: &[f64]| -> Vec<f64> { v.chunks(self.n_pix).rev().flatten().copied().collect() };
        let t0 = self.times[0];
        let t1 = *self.times.last().expect("non-empty");
        RingIntensitySeries {
            times: self.times.iter().rev().map(|t| t0 + t1 - t).collect(),
            intensity: rev(&self.intensity),
            amplitude: self
                .amplitude
                .as_ref()
                .map(|a| a.chunks(self.n_pix).rev().flatten().copied().collect()),
            ..self.clone()
        }
    }

    /// Every intensity times `c`.
    pub fn scaled(&self, c: f64) -> Self {
        RingIntensitySeries {
            intensity: self.intensity.iter().map(|v| v * c).collect(),
            amplitude: self
                .amplitude
                .as_ref()
                .map(|a| a.iter().map(|p| p * c.sqrt()).collect()),
            ..self.clone()
        }
    }
}

/// Uniform spacing of frame times, as for trajectories.
fn frame_interval(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Insufficient("series has no frames".into()));
    }
    if times.len() == 1 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::invalid("frame times must increase"));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs()) {
            return Err(Error::invalid("frame times are not uniformly spaced"));
        }
    }
    Ok(dt)
}

/// Collects ring samples frame by frame.
#[derive(Clone, Debug)]
pub struct RingSeriesBuilder {
    ring: QRing,
    norm: Option<Vec<f64>>,
    times: Vec<f64>,
    intensity: Vec<f64>,
    amplitude: Vec<Complex64>,
    with_amplitude: Option<bool>,
}

impl RingSeriesBuilder {
    pub fn new(ring: QRing) -> Self {
        RingSeriesBuilder {
            ring,
            norm: None,
            times: Vec::new(),
            intensity: Vec::new(),
            amplitude: Vec::new(),
            with_amplitude: None,
        }
    }

    /// Uses Σᵢfᵢ(|q|)² of `frame`'s atoms as the F(q,τ) normalization.
    pub fn normalize_by(mut self, frame: &Frame, scattering: &Scattering) -> Result<Self> {
        let groups = resolve(scattering, frame.species())?;
        self.norm = Some(self.ring.norms().iter().map(|&q| sum_f_squared(&groups, q)).collect());
        Ok(self)
    }

    pub fn ring(&self) -> &QRing {
        &self.ring
    }

    fn kind(&mut self, amplitude: bool) -> Result<()> {
        match self.with_amplitude {
            None => {
                self.with_amplitude = Some(amplitude);
                Ok(())
            }
            Some(a) if a == amplitude => Ok(()),
            Some(_) => Err(Error::invalid(
                "cannot mix amplitude and intensity frames in one series",
            )),
        }
    }

    pub fn push_intensity(&mut self, field: &SpeckleField) -> Result<()> {
        self.kind(false)?;
        let v = field.gather(&self.ring)?;
        self.intensity.extend(v);
        self.times.push(field.time());
        Ok(())
    }

    pub fn push_amplitude(&mut self, field: &AmplitudeField) -> Result<()> {
        self.kind(true)?;
        let v = field.gather(&self.ring)?;
        self.intensity.extend(v.iter().map(|p| p.norm_sqr()));
        self.amplitude.extend(v);
        self.times.push(field.time());
        Ok(())
    }

    pub fn finish(self) -> Result<RingIntensitySeries> {
        let n_pix = self.ring.len();
        let mut s = if self.with_amplitude == Some(true) {
            RingIntensitySeries::from_amplitudes(self.times, n_pix, self.amplitude)?
        } else {
            RingIntensitySeries::from_rows(self.times, n_pix, self.intensity)?
        };
        if let Some(norm) = self.norm {
            s = s.with_norm(norm)?;
        }
        Ok(s)
    }
}

/// Gathers the ring from each field in order.
pub fn extract_ring_series(fields: &[SpeckleField], ring: &QRing) -> Result<RingIntensitySeries> {
    let mut b = RingSeriesBuilder::new(ring.clone());
    for f in fields {
        b.push_intensity(f)?;
    }
    b.finish()
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and standard error of the mean.
pub(crate) fn mean_se(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

/// Ring amplitudes of every frame by the direct route, evaluated only at
/// the ring's wavevectors.
pub fn ring_series_direct(
    traj: &crate::trajio::Trajectory,
    ring: &QRing,
    scattering: &Scattering,
) -> Result<RingIntensitySeries> {
    let q = ring.q_vectors();
    let mut b = RingSeriesBuilder::new(ring.clone()).normalize_by(traj.frame(0), scattering)?;
    for frame in traj.frames() {
        b.push_amplitude(&crate::scatter::amplitude_direct(frame, &q, scattering)?)?;
    }
    b.finish()
}

/// Ring series for several rings from one FFT per frame.
pub fn ring_series_fft(
    traj: &crate::trajio::Trajectory,
    scatterer: &crate::scatter::FftScatterer,
    rings: &[QRing],
    scattering: &Scattering,
    amplitudes: bool,
) -> Result<Vec<RingIntensitySeries>> {
    let mut builders = rings
        .iter()
        .map(|r| RingSeriesBuilder::new(r.clone()).normalize_by(traj.frame(0), scattering))
        .collect::<Result<Vec<_>>>()?;
    for frame in traj.frames() {
        let p = scatterer.amplitude(frame, scattering)?;
        for b in &mut builders {
            if amplitudes {
                b.push_amplitude(&p)?;
            } else {
                // gathering amplitudes and squaring matches the intensity field
                let v = p.gather(b.ring())?;
                b.kind(false)?;
                b.intensity.extend(v.iter().map(|z| z.norm_sqr()));
                b.times.push(p.time());
            }
        }
    }
    builders.into_iter().map(RingSeriesBuilder::finish).collect()
}
