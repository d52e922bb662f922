//! Optical contrast in q and in time, exposure integration, incoherent
//! superposition and contrast decay with exposure time.

use super::{mean, mean_se, IsfResult, RingIntensitySeries};
use crate::scatter::SpeckleField;
use crate::{Error, Result};

/// A mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastEstimate {
    pub value: f64,
    pub std_err: f64,
    /// Independent estimates averaged.
    pub samples: usize,
}

/// Population variance over squared mean of one snapshot of ring pixels.
pub fn contrast_ring(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Insufficient(
            "contrast needs a ring of at least two pixels".into(),
        ));
    }
    let m = mean(values);
    if !(m > 0.0) {
        return Err(Error::Insufficient("ring has zero mean intensity".into()));
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    Ok(var / (m * m))
}

/// [`contrast_ring`] of every frame, averaged; the error is over frames.
pub fn contrast_ring_series(series: &RingIntensitySeries) -> Result<ContrastEstimate> {
    let per_frame = series.rows().map(contrast_ring).collect::<Result<Vec<_>>>()?;
    let (value, std_err) = mean_se(&per_frame);
    Ok(ContrastEstimate {
        value,
        std_err,
        samples: per_frame.len(),
    })
}

/// β0 = g2(0) − 1 per pixel, averaged over pixels; the error is over pixels.
pub fn contrast_time(series: &RingIntensitySeries) -> Result<ContrastEstimate> {
    if series.n_frames() < 2 {
        return Err(Error::Insufficient("time contrast needs at least two frames".into()));
    }
    let per_pixel: Vec<f64> = (0..series.n_pixels())
        .filter_map(|p| {
            let x = series.pixel(p);
            let m = mean(&x);
            (m > 0.0).then(|| x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64 / (m * m) - 1.0)
        })
        .collect();
    if per_pixel.is_empty() {
        return Err(Error::Insufficient("every ring pixel has zero mean intensity".into()));
    }
    let (value, std_err) = mean_se(&per_pixel);
    Ok(ContrastEstimate {
        value,
        std_err,
        samples: per_pixel.len(),
    })
}

/// Frames per exposure window, or an error if `exposure` is not a multiple
/// of the frame interval.
fn window_frames(series: &RingIntensitySeries, exposure: f64) -> Result<usize> {
    let dt = series.frame_interval();
    if dt == 0.0 {
        return Err(Error::Insufficient(
            "exposure integration needs at least two frames".into(),
        ));
    }
    let w = (exposure / dt).round();
    if w < 1.0 || (w * dt - exposure).abs() > 1e-6 * dt {
        return Err(Error::invalid(format!(
            "exposure {exposure} ps must be a positive multiple of the frame interval {dt} ps"
        )));
    }
    Ok(w as usize)
}

/// I_Δ: left Riemann sums of I·dt over windows of length `exposure`.
///
/// Windows start every `stride` frames; the default is the window length,
/// so windows do not overlap. The result is an unnormalized integral; β and
/// g2 are ratios and do not see the scale.
pub fn integrate_exposure(
    series: &RingIntensitySeries,
    exposure: f64,
    stride: Option<usize>,
) -> Result<RingIntensitySeries> {
    let w = window_frames(series, exposure)?;
    let stride = stride.unwrap_or(w);
    if stride == 0 {
        return Err(Error::invalid("window stride must be positive"));
    }
    let t = series.n_frames();
    if w > t {
        return Err(Error::Insufficient(format!(
            "exposure of {w} frames exceeds the {t}-frame series"
        )));
    }
    let dt = series.frame_interval();
    let n_pix = series.n_pixels();
    let starts: Vec<usize> = (0..=t - w).step_by(stride).collect();
    let mut out = vec![0.0; starts.len() * n_pix];
    for (row, &s) in out.chunks_mut(n_pix).zip(&starts) {
        for j in s..s + w {
            row.iter_mut().zip(series.row(j)).for_each(|(a, b)| *a += b * dt);
        }
    }
    let times = starts.iter().map(|&s| series.times()[s]).collect();
    let r = RingIntensitySeries::from_rows(times, n_pix, out)?.with_m(series.m());
    r.with_norm(series.norm().to_vec())
}

/// β_Δ/β0 for a single exponential |F̂|² = e^{−2Γτ} at `x = 2ΓΔt`:
/// 2(e^{−x} − 1 + x)/x².
pub fn diffusive_contrast_factor(x: f64) -> f64 {
    if x < 0.5 {
        // 2·Σ (−x)^k/(k+2)!: the closed form cancels badly here
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..16 {
            sum += term;
            term *= -x / (k + 3) as f64;
        }
        sum
    } else {
        2.0 * ((-x).exp() - 1.0 + x) / (x * x)
    }
}

/// Pixel-wise intensity sum of fields from different configurations.
pub fn superpose_incoherent(fields: &[SpeckleField]) -> Result<SpeckleField> {
    let (first, rest) = fields
        .split_first()
        .ok_or_else(|| Error::Insufficient("nothing to superpose".into()))?;
    let mut out = first.clone();
    for f in rest {
        out.add_assign(f)?;
    }
    Ok(out)
}

/// Sum of `m` frames spaced `gap` frames apart, for each starting frame.
pub fn superpose_time_separated(series: &RingIntensitySeries, m: usize, gap: usize) -> Result<RingIntensitySeries> {
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if m > 1 && gap == 0 {
        return Err(Error::invalid("superposed configurations need a positive gap"));
    }
    let span = (m - 1) * gap;
    let t = series.n_frames();
    if span >= t {
        return Err(Error::Insufficient(format!(
            "M = {m} with gap {gap} needs more than {t} frames"
        )));
    }
    let n_pix = series.n_pixels();
    let mut out = vec![0.0; (t - span) * n_pix];
    for (k, row) in out.chunks_mut(n_pix).enumerate() {
        for j in 0..m {
            row.iter_mut().zip(series.row(k + j * gap)).for_each(|(a, b)| *a += b);
        }
    }
    let r = RingIntensitySeries::from_rows(series.times()[..t - span].to_vec(), n_pix, out)?.with_m(m * series.m());
    r.with_norm(series.norm().to_vec())
}

/// Pixel-wise sum of series from independent sources.
pub fn superpose_independent(sources: &[RingIntensitySeries]) -> Result<RingIntensitySeries> {
    let (first, rest) = sources
        .split_first()
        .ok_or_else(|| Error::Insufficient("nothing to superpose".into()))?;
    let mut out = first.intensities().to_vec();
    for s in rest {
        if s.n_pixels() != first.n_pixels() || s.n_frames() != first.n_frames() {
            return Err(Error::GridMismatch("superposed series differ in shape".into()));
        }
        out.iter_mut().zip(s.intensities()).for_each(|(a, b)| *a += b);
    }
    let m = sources.iter().map(|s| s.m()).sum();
    let r = RingIntensitySeries::from_rows(first.times().to_vec(), first.n_pixels(), out)?.with_m(m);
    r.with_norm(first.norm().to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContrastMethod {
    FromIntensity,
    FromIsf,
}

/// β_Δ against exposure for one superposition count.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastCurve {
    pub m: usize,
    /// ps.
    pub exposures: Vec<f64>,
    pub beta: Vec<f64>,
    pub std_err: Vec<f64>,
    /// β at a one-frame exposure, same M.
    pub beta0: f64,
    /// β_Δ/β0.
    pub beta_norm: Vec<f64>,
    pub method: ContrastMethod,
}

/// Where the M configurations of a superposition come from.
#[derive(Clone, Copy, Debug)]
pub enum Sources<'a> {
    /// One trajectory; configurations `gap` frames apart.
    TimeSeparated {
        series: &'a RingIntensitySeries,
        gap: usize,
    },
    /// The first M of several independent series.
    Independent(&'a [RingIntensitySeries]),
}

/// β_Δ for each exposure and each M, by exposure integration and ring contrast.
pub fn contrast_vs_exposure(sources: Sources<'_>, exposures: &[f64], ms: &[usize]) -> Result<Vec<ContrastCurve>> {
    ms.iter()
        .map(|&m| {
            let series = match sources {
                Sources::TimeSeparated { series, gap } => superpose_time_separated(series, m, gap)?,
                Sources::Independent(list) => {
                    if m == 0 || m > list.len() {
                        return Err(Error::Insufficient(format!(
                            "M = {m} needs that many independent series, have {}",
                            list.len()
                        )));
                    }
                    superpose_independent(&list[..m])?
                }
            };
            let beta0 = contrast_ring_series(&series)?.value;
            let (beta, std_err): (Vec<f64>, Vec<f64>) = exposures
                .iter()
                .map(|&e| {
                    let c = contrast_ring_series(&integrate_exposure(&series, e, None)?)?;
                    Ok((c.value, c.std_err))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(ContrastCurve {
                m,
                exposures: exposures.to_vec(),
                beta_norm: beta.iter().map(|b| b / beta0).collect(),
                beta,
                std_err,
                beta0,
                method: ContrastMethod::FromIntensity,
            })
        })
        .collect()
}

/// β_Δ = 2β0 ∫₀^Δt (1 − t/Δt)|F̂(t)|² dt/Δt by the trapezoid rule, with
/// `f_hat[j]` sampled at t = j·`dt`.
pub fn contrast_from_isf(f_hat: &[f64], dt: f64, exposure: f64, beta0: f64) -> Result<f64> {
    if !(dt > 0.0 && exposure > 0.0) {
        return Err(Error::invalid("sample spacing and exposure must be positive"));
    }
    let n = (exposure / dt).round();
    if (n * dt - exposure).abs() > 1e-6 * dt || n < 1.0 {
        return Err(Error::invalid(format!(
            "exposure {exposure} ps is not a multiple of the sample spacing {dt} ps"
        )));
    }
    let n = n as usize;
    if f_hat.len() <= n {
        return Err(Error::Insufficient(format!(
            "F̂ covers {} samples, exposure needs {}",
            f_hat.len(),
            n + 1
        )));
    }
    let g = |j: usize| (1.0 - j as f64 / n as f64) * f_hat[j] * f_hat[j];
    let integral = dt * (0.5 * (g(0) + g(n)) + (1..n).map(g).sum::<f64>());
    Ok(2.0 * beta0 * integral / exposure)
}

/// [`contrast_from_isf`] for each exposure; `isf` must hold lags 0, 1, 2, …
pub fn isf_contrast_curve(isf: &IsfResult, dt: f64, exposures: &[f64], beta0: f64, m: usize) -> Result<ContrastCurve> {
    if isf.lags.iter().enumerate().any(|(i, &l)| l != i) {
        return Err(Error::invalid("F̂ must be sampled at consecutive lags from 0"));
    }
    let beta = exposures
        .iter()
        .map(|&e| contrast_from_isf(&isf.f_hat, dt, e, beta0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContrastCurve {
        m,
        exposures: exposures.to_vec(),
        beta_norm: beta.iter().map(|b| b / beta0).collect(),
        std_err: vec![f64::NAN; beta.len()],
        beta,
        beta0,
        method: ContrastMethod::FromIsf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_factor_limits() {
        assert_eq!(diffusive_contrast_factor(0.0), 1.0);
        let x = 1e-6;
        assert!((diffusive_contrast_factor(x) - (1.0 - x / 3.0)).abs() < 1e-13);
        // high-precision values on both sides of the branch switch
        for (x, want) in [
            (0.001, 0.9996667499833361),
            (0.1, 0.9674836071919146),
            (0.4999, 0.8522714009604007),
            (0.5, 0.8522452777010674),
            (2.0, 0.5676676416183064),
        ] {
            let got = diffusive_contrast_factor(x);
            assert!((got - want).abs() < 2e-15, "x = {x}: {got} vs {want}");
        }
        let big = 1e4;
        assert!((diffusive_contrast_factor(big) * big / 2.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn flat_ring_has_zero_contrast() {
        assert_eq!(contrast_ring(&[2.0; 10]).unwrap(), 0.0);
        assert!(contrast_ring(&[1.0]).is_err());
    }

    #[test]
    fn static_isf_keeps_full_contrast() {
        let f = vec![1.0; 101];
        let b = contrast_from_isf(&f, 0.1, 10.0, 0.7).unwrap();
        assert!((b - 0.7).abs() < 1e-12);
    }

    #[test]
    fn exponential_isf_matches_closed_form() {
        let gamma = 0.8;
        let dt = 1e-3;
        let f: Vec<f64> = (0..=5000).map(|j| (-gamma * j as f64 * dt).exp()).collect();
        for exposure in [0.5, 2.0, 5.0] {
            let x = 2.0 * gamma * exposure;
            let want = 2.0 * ((-x).exp() - 1.0 + x) / (x * x);
            let got = contrast_from_isf(&f, dt, exposure, 1.0).unwrap();
            assert!((got - want).abs() < 1e-6, "{exposure}: {got} vs {want}");
        }
    }

    #[test]
    fn one_frame_exposure_is_identity_times_dt() {
        let s = RingIntensitySeries::from_rows(vec![0.0, 2.0, 4.0], 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let e = integrate_exposure(&s, 2.0, None).unwrap();
        assert_eq!(e.intensities(), &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
        let e = integrate_exposure(&s, 4.0, Some(1)).unwrap();
        assert_eq!(e.intensities(), &[8.0, 12.0, 16.0, 20.0]);
        assert!(integrate_exposure(&s, 1.0, None).is_err());
    }
}
