//! correlate, contrast and fit: everything that starts from ring series.

use serde::Serialize;
use xpcs_core::fit::{dispersion, fit_diffusivity, fit_exponential, fit_stretched, DecayFit, FitOptions};
use xpcs_core::stats::{
    contrast_ring_series, contrast_time, contrast_vs_exposure, diffusive_contrast_factor, g2_lags, intensity_histogram,
    siegert_check, superpose_time_separated, CorrelationResult, RingIntensitySeries, Sources,
};
use xpcs_core::trajio::mean_square_displacement;
use xpcs_core::Error;

use super::{lags, load_source, ring_series, Flags, Ring, Source};
use crate::config::{DecayModel, PipelineConfig};
use crate::error::CliResult;
use crate::output::{OutputDir, Table};
use crate::row;

fn correlation(cfg: &PipelineConfig, series: &RingIntensitySeries) -> CliResult<CorrelationResult> {
    Ok(g2_lags(series, &lags(cfg, series)?)?)
}

fn g2_table(corr: &CorrelationResult, n_pixels: usize) -> Table {
    let mut t = Table::new(&["tau", "g2", "g2_norm", "f_hat_sq", "n_samples"]);
    for i in 0..corr.taus.len() {
        let fsq = corr.f_hat_sq.as_ref().map_or(f64::NAN, |v| v[i]);
        t.push(row![
            corr.taus[i],
            corr.g2[i],
            corr.g2_norm[i],
            fsq,
            corr.counts[i] * n_pixels
        ]);
    }
    t
}

pub fn correlate(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let src = load_source(cfg)?;
    let rings = ring_series(cfg, &src)?;
    let mut summary = Table::new(&[
        "ring",
        "q",
        "dq",
        "q_eff",
        "n_pixels",
        "n_frames",
        "beta0",
        "siegert_max",
        "siegert_rms",
        "gamma",
        "gamma_err",
    ]);
    for r in &rings {
        let corr = correlation(cfg, &r.series)?;
        out.write_csv(format!("g2_ring{:02}.csv", r.index), &g2_table(&corr, r.ring.len()))?;
        let (max, rms) = match corr.f_hat_sq {
            Some(_) => match siegert_check(&corr) {
                Ok(s) => {
                    log::info!("ring {}: Siegert deviation max {:.4}, rms {:.4}", r.index, s.max, s.rms);
                    (s.max, s.rms)
                }
                Err(Error::Insufficient(msg)) => {
                    log::warn!("ring {}: no Siegert check ({msg})", r.index);
                    (f64::NAN, f64::NAN)
                }
                Err(e) => return Err(e.into()),
            },
            None => (f64::NAN, f64::NAN),
        };
        // quick-look rate; `fit` is the command that flags bad decays
        let (gamma, gamma_err) = match decay_fit(cfg, &corr) {
            Ok(f) if !f.is_flagged() => (f.gamma, f.gamma_err),
            _ => (f64::NAN, f64::NAN),
        };
        summary.push(row![
            r.index,
            r.spec.q,
            r.spec.dq,
            r.q_eff(),
            r.ring.len(),
            r.series.n_frames(),
            corr.beta0,
            max,
            rms,
            gamma,
            gamma_err
        ]);
    }
    out.write_csv("correlate_summary.csv", &summary)?;
    Ok(Vec::new())
}

fn decay_fit(cfg: &PipelineConfig, corr: &CorrelationResult) -> xpcs_core::Result<DecayFit> {
    let opts: FitOptions = cfg.fit.options();
    match cfg.fit.model {
        DecayModel::Exponential => fit_exponential(&corr.taus, &corr.g2_norm, &opts),
        DecayModel::Stretched => fit_stretched(&corr.taus, &corr.g2_norm, &opts),
    }
}

fn default_exposures(series: &RingIntensitySeries) -> Vec<f64> {
    let dt = series.frame_interval();
    let top = (series.n_frames() / 4).max(1);
    std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k <= top)
        .map(|k| k as f64 * dt)
        .collect()
}

pub fn contrast(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let src = load_source(cfg)?;
    let rings = ring_series(cfg, &src)?;
    let mut master = Table::new(&["ring", "q", "M", "dt", "x", "beta_norm", "theory"]);
    let mut summary = Table::new(&[
        "ring",
        "q",
        "M",
        "beta_ring",
        "beta_ring_err",
        "beta_time",
        "beta_time_err",
        "m_hat",
        "m_round",
        "chi2",
        "chi2_dof",
        "chi2_p",
    ]);
    for r in &rings {
        let s = &r.series;
        let exposures = if cfg.exposures.is_empty() {
            default_exposures(s)
        } else {
            cfg.exposures.clone()
        };
        let curves = contrast_vs_exposure(
            Sources::TimeSeparated {
                series: s,
                gap: cfg.gap,
            },
            &exposures,
            &cfg.ms,
        )?;
        // Γ for the collapse columns; absent when the decay cannot be fitted
        let gamma = correlation(cfg, s)
            .ok()
            .and_then(|c| decay_fit(cfg, &c).ok())
            .filter(|f| !f.is_flagged())
            .map(|f| f.gamma);
        let mut table = Table::new(&["dt", "M", "beta", "beta_err", "beta_norm", "x", "theory"]);
        for c in &curves {
            for i in 0..c.exposures.len() {
                let x = gamma.map_or(f64::NAN, |g| 2.0 * g * c.exposures[i]);
                let theory = if x.is_nan() {
                    f64::NAN
                } else {
                    diffusive_contrast_factor(x)
                };
                table.push(row![
                    c.exposures[i],
                    c.m,
                    c.beta[i],
                    c.std_err[i],
                    c.beta_norm[i],
                    x,
                    theory
                ]);
                master.push(row![r.index, r.spec.q, c.m, c.exposures[i], x, c.beta_norm[i], theory]);
            }
        }
        out.write_csv(format!("contrast_ring{:02}.csv", r.index), &table)?;

        for &m in &cfg.ms {
            let sup = superpose_time_separated(s, m, cfg.gap)?;
            let ring_beta = contrast_ring_series(&sup)?;
            let time_beta = match contrast_time(&sup) {
                Ok(b) => (b.value, b.std_err),
                Err(Error::Insufficient(_)) => (f64::NAN, f64::NAN),
                Err(e) => return Err(e.into()),
            };
            let hist = match intensity_histogram(sup.intensities(), cfg.contrast.histogram_bins) {
                Ok(h) => Some(h),
                Err(Error::Insufficient(msg)) => {
                    log::warn!("ring {}, M = {m}: no histogram ({msg})", r.index);
                    None
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(h) = &hist {
                let mut t = Table::new(&["kappa", "density", "erlang_fit"]);
                for i in 0..h.kappa.len() {
                    t.push(row![h.kappa[i], h.density[i], h.erlang[i]]);
                }
                out.write_csv(format!("histogram_ring{:02}_m{m}.csv", r.index), &t)?;
            }
            let nan = f64::NAN;
            summary.push(row![
                r.index,
                r.spec.q,
                m,
                ring_beta.value,
                ring_beta.std_err,
                time_beta.0,
                time_beta.1,
                hist.as_ref().map_or(nan, |h| h.m_hat),
                hist.as_ref().map_or(0, |h| h.m_round),
                hist.as_ref().map_or(nan, |h| h.chi_square.statistic),
                hist.as_ref().map_or(0, |h| h.chi_square.dof),
                hist.as_ref().map_or(nan, |h| h.chi_square.p_value)
            ]);
        }
    }
    out.write_csv("contrast_master.csv", &master)?;
    out.write_csv("contrast_summary.csv", &summary)?;
    Ok(Vec::new())
}

/// Rings needed for a dispersion curve.
pub const MIN_RINGS: usize = 3;

#[derive(Serialize)]
struct DiffusivityReport {
    mode: String,
    d_a2_per_ps: f64,
    d_err_a2_per_ps: f64,
    d_um2_per_s: f64,
    d2_a4_per_ps: Option<f64>,
    d2_err_a4_per_ps: Option<f64>,
    q_range: (f64, f64),
    n_points: usize,
    flags: Vec<String>,
}

#[derive(Serialize)]
struct DispersionReport {
    gamma0: Option<f64>,
    q_min: Option<f64>,
    /// Γ0/q_min², Å²/ps.
    rough_d_a2_per_ps: Option<f64>,
    warning: Option<String>,
}

#[derive(Serialize)]
struct MsdReport {
    max_lag: usize,
    d_a2_per_ps: f64,
    d_um2_per_s: f64,
}

#[derive(Serialize)]
struct FitReport {
    model: String,
    window: [f64; 2],
    diffusivity: Option<DiffusivityReport>,
    dispersion: Option<DispersionReport>,
    msd: Option<MsdReport>,
}

/// Rings whose decay cannot be fitted are flagged and left out of the
/// dispersion; with fewer than [`MIN_RINGS`] usable rings the diffusivity
/// is skipped.
pub fn fit(cfg: &PipelineConfig, out: &mut OutputDir) -> CliResult<Flags> {
    let src = load_source(cfg)?;
    let rings: Vec<Ring> = ring_series(cfg, &src)?;
    let mut flags = Vec::new();
    let mut q = Vec::with_capacity(rings.len());
    let mut fits = Vec::with_capacity(rings.len());
    let mut table = Table::new(&[
        "ring",
        "q",
        "q_eff",
        "gamma",
        "gamma_err",
        "stretch",
        "stretch_err",
        "tau_lo",
        "tau_hi",
        "n_points",
        "residual",
        "flags",
    ]);
    for r in &rings {
        let corr = correlation(cfg, &r.series)?;
        let f = match decay_fit(cfg, &corr) {
            Ok(f) => f,
            Err(Error::Insufficient(msg)) => {
                flags.push(format!("ring {} (q = {}): not fittable, {msg}", r.index, r.spec.q));
                let nan = f64::NAN;
                table.push(row![
                    r.index,
                    r.spec.q,
                    r.q_eff(),
                    nan,
                    nan,
                    nan,
                    nan,
                    nan,
                    nan,
                    0usize,
                    nan,
                    "unfittable"
                ]);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let names: Vec<String> = f.flags.iter().map(ToString::to_string).collect();
        for n in &names {
            flags.push(format!("ring {} (q = {}): {n}", r.index, r.spec.q));
        }
        table.push(row![
            r.index,
            r.spec.q,
            r.q_eff(),
            f.gamma,
            f.gamma_err,
            f.stretch,
            f.stretch_err,
            f.window.0,
            f.window.1,
            f.n_points,
            f.residual_norm,
            names.join(";")
        ]);
        q.push(r.q_eff());
        fits.push(f);
    }
    out.write_csv("fits.csv", &table)?;

    let (diffusivity, dispersion_report) = if fits.len() < MIN_RINGS {
        flags.push(format!(
            "diffusivity: only {} fittable ring(s), need {MIN_RINGS}",
            fits.len()
        ));
        (None, None)
    } else {
        let curve = dispersion(&q, &fits)?;
        let mut t = Table::new(&["q", "q2", "gamma", "gamma_err", "stretch", "normalized"]);
        for i in 0..curve.q.len() {
            t.push(row![
                curve.q[i],
                curve.q[i] * curve.q[i],
                curve.gamma[i],
                curve.gamma_err[i],
                curve.stretch[i],
                curve.normalized[i]
            ]);
        }
        out.write_csv("dispersion.csv", &t)?;
        if let Some(w) = &curve.warning {
            log::warn!("dispersion: {w}");
        }
        let d = fit_diffusivity(&curve, cfg.fit.mode())?;
        for f in &d.flags {
            flags.push(format!("diffusivity: {f}"));
        }
        log::info!("D = {:.5} ± {:.5} Å²/ps ({:.1} µm²/s)", d.d, d.d_err, d.d_um2_per_s());
        let report = DiffusivityReport {
            mode: format!("{:?}", cfg.fit.diffusivity).to_lowercase(),
            d_a2_per_ps: d.d,
            d_err_a2_per_ps: d.d_err,
            d_um2_per_s: d.d_um2_per_s(),
            d2_a4_per_ps: d.d2,
            d2_err_a4_per_ps: d.d2_err,
            q_range: d.q_range,
            n_points: d.n_points,
            flags: d.flags.iter().map(ToString::to_string).collect(),
        };
        let disp = DispersionReport {
            gamma0: curve.gamma0,
            q_min: curve.q_min,
            rough_d_a2_per_ps: curve.rough_diffusivity(),
            warning: curve.warning.clone(),
        };
        (Some(report), Some(disp))
    };

    let msd = match &src {
        Source::Trajectory(t) if t.has_unwrapped() && t.n_frames() > 2 => {
            let max_lag = cfg
                .fit
                .msd_max_lag
                .unwrap_or(t.n_frames() / 10)
                .clamp(1, t.n_frames() - 1);
            let m = mean_square_displacement(t, max_lag, None)?;
            log::info!("MSD D = {:.5} Å²/ps", m.diffusivity);
            Some(MsdReport {
                max_lag,
                d_a2_per_ps: m.diffusivity,
                d_um2_per_s: m.diffusivity_um2_per_s(),
            })
        }
        _ => None,
    };

    let report = FitReport {
        model: format!("{:?}", cfg.fit.model).to_lowercase(),
        window: cfg.fit.window,
        diffusivity,
        dispersion: dispersion_report,
        msd,
    };
    out.write_json("diffusivity.json", &report)?;
    Ok(flags)
}
