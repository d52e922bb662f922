//! Time correlations: g2, the intermediate scattering function and the
//! Siegert relation between them.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{mean, RingIntensitySeries};
use crate::{Error, Result};

/// Lag sums `c[L] = Σₜ x[t]·conj(x[t+L])` for every lag of one series.
struct LagSums {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl LagSums {
    fn new(len: usize) -> Self {
        let n = (2 * len).max(2);
        let mut planner = FftPlanner::new();
        LagSums {
            len,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn compute(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.len);
        let n = self.fwd.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..x.len()].copy_from_slice(x);
        self.fwd.process(&mut buf);
        buf.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
        self.inv.process(&mut buf);
        // the inverse gives Σ x[t+L]·conj(x[t]); conjugate and rescale
        buf.truncate(self.len);
        buf.iter_mut().for_each(|v| *v = v.conj() / n as f64);
        buf
    }
}

/// Lag counts for `taus`, each a multiple of the frame interval.
fn lags_for(series: &RingIntensitySeries, taus: &[f64]) -> Result<Vec<usize>> {
    let dt = series.frame_interval();
    taus.iter()
        .map(|&tau| {
            if tau == 0.0 {
                return Ok(0);
            }
            if dt == 0.0 || tau < 0.0 {
                return Err(Error::invalid(format!("τ = {tau} ps is not a lag of this series")));
            }
            let lag = (tau / dt).round();
            if (lag * dt - tau).abs() > 1e-6 * dt {
                return Err(Error::invalid(format!(
                    "τ = {tau} ps is not a multiple of the frame interval {dt} ps"
                )));
            }
            Ok(lag as usize)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationResult {
    /// ps.
    pub taus: Vec<f64>,
    pub lags: Vec<usize>,
    pub g2: Vec<f64>,
    /// (g2 − 1)/β0; NaN when β0 is at roundoff level.
    pub g2_norm: Vec<f64>,
    /// g2(0) − 1.
    pub beta0: f64,
    /// |F̂|², when the series carries amplitudes.
    pub f_hat_sq: Option<Vec<f64>>,
    /// Time origins per pixel at each lag.
    pub counts: Vec<usize>,
    /// Lags with fewer than two samples; their values are NaN.
    pub flagged: Vec<bool>,
}

impl CorrelationResult {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

/// g2(τ) = ⟨I(t)I(t+τ)⟩ₜ/⟨I⟩ₜ², per pixel, then averaged over the ring.
pub fn g2(series: &RingIntensitySeries, taus: &[f64]) -> Result<CorrelationResult> {
    let lags = lags_for(series, taus)?;
    g2_lags(series, &lags)
}

pub fn g2_lags(series: &RingIntensitySeries, lags: &[usize]) -> Result<CorrelationResult> {
    let t = series.n_frames();
    let sums = LagSums::new(t);
    // per pixel: lag sums scaled by 1/mean², so each entry is g2 times the count
    let per_pixel: Vec<Option<Vec<f64>>> = (0..series.n_pixels())
        .into_par_iter()
        .map(|p| {
            let x = series.pixel(p);
            let m = mean(&x);
            if m == 0.0 {
                return None;
            }
            let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let c = sums.compute(&xc);
            Some(c.iter().map(|v| v.re / (m * m)).collect())
        })
        .collect();
    let live: Vec<&Vec<f64>> = per_pixel.iter().flatten().collect();
    if live.is_empty() {
        return Err(Error::Insufficient("every ring pixel has zero mean intensity".into()));
    }
    let pixel_avg = |lag: usize| -> f64 {
        let count = (t - lag) as f64;
        live.iter().map(|c| c[lag] / count).sum::<f64>() / live.len() as f64
    };
    let beta0 = pixel_avg(0) - 1.0;
    let counts: Vec<usize> = lags.iter().map(|&l| t.saturating_sub(l)).collect();
    let flagged: Vec<bool> = counts.iter().map(|&c| c < 2).collect();
    let g2v: Vec<f64> = lags
        .iter()
        .zip(&flagged)
        .map(|(&l, &f)| if f { f64::NAN } else { pixel_avg(l) })
        .collect();
    // a frozen ring has no contrast to normalize by
    let g2_norm = if beta0.abs() > 1e-12 {
        g2v.iter().map(|g| (g - 1.0) / beta0).collect()
    } else {
        vec![f64::NAN; g2v.len()]
    };
    let f_hat_sq = if series.has_amplitudes() {
        let isf = isf_impl(series, lags, false)?;
        Some(isf.f_hat.iter().map(|f| f * f).collect())
    } else {
        None
    };
    Ok(CorrelationResult {
        taus: lags.iter().map(|&l| l as f64 * series.frame_interval()).collect(),
        lags: lags.to_vec(),
        g2: g2v,
        g2_norm,
        beta0,
        f_hat_sq,
        counts,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsfResult {
    pub taus: Vec<f64>,
    pub lags: Vec<usize>,
    /// Real part of the ring-averaged F(q,τ).
    pub f: Vec<f64>,
    /// F/F(0).
    pub f_hat: Vec<f64>,
    /// Imaginary part of the ring average.
    pub imag: Vec<f64>,
    pub counts: Vec<usize>,
}

/// F(q,τ) = ⟨p(t)p*(t+τ)⟩ₜ/Σᵢfᵢ², averaged over the ring.
///
/// Fails if the imaginary part of the average exceeds 1e-3·F(0) at any lag.
pub fn intermediate_scattering(series: &RingIntensitySeries, taus: &[f64]) -> Result<IsfResult> {
    let lags = lags_for(series, taus)?;
    isf_impl(series, &lags, true)
}

pub fn intermediate_scattering_lags(series: &RingIntensitySeries, lags: &[usize]) -> Result<IsfResult> {
    isf_impl(series, lags, true)
}

fn isf_impl(series: &RingIntensitySeries, lags: &[usize], strict: bool) -> Result<IsfResult> {
    if !series.has_amplitudes() {
        return Err(Error::invalid("the intermediate scattering function needs amplitudes"));
    }
    let t = series.n_frames();
    if let Some(&bad) = lags.iter().find(|&&l| l + 1 > t) {
        return Err(Error::Insufficient(format!("lag {bad} exceeds the {t}-frame series")));
    }
    let sums = LagSums::new(t);
    let per_pixel: Vec<Vec<Complex64>> = (0..series.n_pixels())
        .into_par_iter()
        .map(|p| {
            let x = series.amplitude_pixel(p).expect("amplitudes checked");
            let norm = series.norm()[p];
            sums.compute(&x).into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let avg = |lag: usize| -> Complex64 {
        let count = (t - lag) as f64;
        per_pixel.iter().map(|c| c[lag] / count).sum::<Complex64>() / per_pixel.len() as f64
    };
    let f0 = avg(0).re;
    let vals: Vec<Complex64> = lags.iter().map(|&l| avg(l)).collect();
    let limit = 1e-3 * f0.abs();
    if strict {
        if let Some(v) = vals.iter().find(|v| v.im.abs() > limit) {
            return Err(Error::ImaginaryResidual {
                residual: v.im.abs(),
                limit,
            });
        }
    }
    Ok(IsfResult {
        taus: lags.iter().map(|&l| l as f64 * series.frame_interval()).collect(),
        lags: lags.to_vec(),
        f: vals.iter().map(|v| v.re).collect(),
        f_hat: vals.iter().map(|v| v.re / f0).collect(),
        imag: vals.iter().map(|v| v.im).collect(),
        counts: lags.iter().map(|&l| t - l).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiegertReport {
    pub taus: Vec<f64>,
    /// |(g2 − 1)/β0 − |F̂|²| per lag; NaN at flagged lags.
    pub deviation: Vec<f64>,
    pub max: f64,
    pub rms: f64,
}

pub fn siegert_check(corr: &CorrelationResult) -> Result<SiegertReport> {
    let fsq = corr
        .f_hat_sq
        .as_ref()
        .ok_or_else(|| Error::invalid("Siegert check needs |F̂|², i.e. a series with amplitudes"))?;
    let deviation: Vec<f64> = corr
        .g2_norm
        .iter()
        .zip(fsq)
        .zip(&corr.flagged)
        .map(|((g, f), &flag)| if flag { f64::NAN } else { (g - f).abs() })
        .collect();
    let valid: Vec<f64> = deviation.iter().copied().filter(|d| !d.is_nan()).collect();
    if valid.is_empty() {
        return Err(Error::Insufficient("no unflagged lags to compare".into()));
    }
    Ok(SiegertReport {
        taus: corr.taus.clone(),
        max: valid.iter().cloned().fold(0.0, f64::max),
        rms: (valid.iter().map(|d| d * d).sum::<f64>() / valid.len() as f64).sqrt(),
        deviation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiegertPoint {
    /// Length of the averaged stretch, ps.
    pub t_sim: f64,
    pub max: f64,
    pub rms: f64,
}

/// Siegert deviation on leading stretches of `frame_counts` frames.
pub fn siegert_convergence(
    series: &RingIntensitySeries,
    taus: &[f64],
    frame_counts: &[usize],
) -> Result<Vec<SiegertPoint>> {
    frame_counts
        .iter()
        .map(|&n| {
            let part = series.slice(0, n)?;
            let r = siegert_check(&g2(&part, taus)?)?;
            Ok(SiegertPoint {
                t_sim: n as f64 * series.frame_interval(),
                max: r.max,
                rms: r.rms,
            })
        })
        .collect()
}
