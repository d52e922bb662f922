use rayon::prelude::*;

use super::Trajectory;
use crate::{Error, Result};

/// 1 Å²/ps expressed in µm²/s.
pub const UM2_PER_S_PER_A2_PER_PS: f64 = 1e4;

#[derive(Clone, Debug)]
pub struct MsdCurve {
    /// Lag times in ps, starting at 0.
    pub lag_times: Vec<f64>,
    /// Mean-square displacement in Å².
    pub msd: Vec<f64>,
    /// Diffusivity from `msd = 6 D τ` over the fit window, Å²/ps.
    pub diffusivity: f64,
    /// Lag indices `[lo, hi]` used by the fit.
    pub fit_window: (usize, usize),
}

impl MsdCurve {
    pub fn diffusivity_um2_per_s(&self) -> f64 {
        self.diffusivity * UM2_PER_S_PER_A2_PER_PS
    }
}

/// MSD averaged over atoms and all time origins for lags `0..=max_lag`.
///
/// `D` is the slope of an ordinary least-squares line through the last
/// `fit_fraction` of the lags, divided by 6 (the default fraction is ½).
pub fn mean_square_displacement(traj: &Trajectory, max_lag: usize, fit_fraction: Option<f64>) -> Result<MsdCurve> {
    if !traj.has_unwrapped() {
        return Err(Error::NeedsUnwrapped);
    }
    let n_frames = traj.n_frames();
    if max_lag == 0 || max_lag >= n_frames {
        return Err(Error::invalid(format!(
            "max_lag must be in 1..{n_frames}, got {max_lag}"
        )));
    }
    let fraction = fit_fraction.unwrap_or(0.5);
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "fit fraction must be in (0, 1], got {fraction}"
        )));
    }
    let frames: Vec<&[[f64; 3]]> = traj.frames().iter().map(|f| f.unwrapped().unwrap()).collect();
    let n_atoms = traj.n_atoms();

    let msd: Vec<f64> = (0..=max_lag)
        .into_par_iter()
        .map(|lag| {
            if lag == 0 {
                return 0.0;
            }
            let origins = n_frames - lag;
            let total: f64 = (0..origins)
                .map(|t0| {
                    frames[t0]
                        .iter()
                        .zip(frames[t0 + lag])
                        .map(|(a, b)| {
                            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                        })
                        .sum::<f64>()
                })
                .sum();
            total / (origins * n_atoms) as f64
        })
        .collect();

    let dt = traj.frame_interval();
    let lag_times: Vec<f64> = (0..=max_lag).map(|k| k as f64 * dt).collect();
    let lo = ((max_lag as f64 * (1.0 - fraction)).floor() as usize).min(max_lag.saturating_sub(1));
    let hi = max_lag;
    let slope = ols_slope(&lag_times[lo..=hi], &msd[lo..=hi]);
    Ok(MsdCurve {
        lag_times,
        msd,
        diffusivity: slope / 6.0,
        fit_window: (lo, hi),
    })
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
