//! Decay-rate fits of normalized correlations, the Γ(q) dispersion curve
//! and diffusivities from Γ = Dq² (+ D₂q⁴).

mod lm;

use std::fmt;

use crate::trajio::UM2_PER_S_PER_A2_PER_PS;
use crate::{Error, Result};
use lm::{levenberg_marquardt, solve};

pub use lm::{MAX_ITERATIONS, STEP_TOLERANCE};

/// Conditions that make a fit unreliable without making it an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitFlag {
    NonDecaying,
    NotConverged,
    StretchOutOfRange,
    NegativeDiffusivity,
}

impl fmt::Display for FitFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitFlag::NonDecaying => "non-decaying input",
            FitFlag::NotConverged => "did not converge",
            FitFlag::StretchOutOfRange => "stretching exponent outside (0, 2]",
            FitFlag::NegativeDiffusivity => "negative diffusivity",
        })
    }
}

/// Which points of (g2 − 1)/β0 enter a fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    /// The first contiguous run with value in `[lo, hi]`, starting at the
    /// first τ > 0 whose value is ≤ `hi`.
    Values { lo: f64, hi: f64 },
    /// All τ in `[lo, hi]`.
    Taus { lo: f64, hi: f64 },
}

impl Default for Window {
    fn default() -> Self {
        Window::Values { lo: 0.05, hi: 0.8 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitOptions {
    pub window: Window,
    /// Fit the prefactor instead of fixing it at 1.
    pub free_amplitude: bool,
    /// Fit ln y with linear least squares (simple exponential only).
    pub log_domain: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    /// ps⁻¹.
    pub gamma: f64,
    pub gamma_err: f64,
    /// Stretching exponent; exactly 1 for the simple fit.
    pub stretch: f64,
    pub stretch_err: f64,
    pub amplitude: f64,
    /// τ range of the points used, ps.
    pub window: (f64, f64),
    pub n_points: usize,
    pub residual_norm: f64,
    /// Over (Γ, γ, A) in that order, free parameters only.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
}

impl DecayFit {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

fn select(taus: &[f64], values: &[f64], window: Window) -> Vec<usize> {
    let ok = |i: usize| taus[i].is_finite() && values[i].is_finite();
    match window {
        Window::Taus { lo, hi } => (0..taus.len())
            .filter(|&i| ok(i) && taus[i] >= lo && taus[i] <= hi)
            .collect(),
        Window::Values { lo, hi } => {
            let Some(start) = (0..taus.len()).find(|&i| ok(i) && taus[i] > 0.0 && values[i] <= hi) else {
                return Vec::new();
            };
            (start..taus.len())
                .take_while(|&i| ok(i) && values[i] >= lo && values[i] <= hi)
                .collect()
        }
    }
}

/// Least-squares fit of A·exp(−2Γτ) to normalized correlation values.
///
/// When nothing decays into the window, the fit runs over every τ > 0 and
/// is flagged [`FitFlag::NonDecaying`].
pub fn fit_exponential(taus: &[f64], values: &[f64], opts: &FitOptions) -> Result<DecayFit> {
    fit_impl(taus, values, opts, false)
}

/// Fit of A·exp(−2(Γτ)^γ), started from the simple fit with γ = 1.
pub fn fit_stretched(taus: &[f64], values: &[f64], opts: &FitOptions) -> Result<DecayFit> {
    fit_impl(taus, values, opts, true)
}

fn fit_impl(taus: &[f64], values: &[f64], opts: &FitOptions, stretched: bool) -> Result<DecayFit> {
    if taus.len() != values.len() {
        return Err(Error::invalid("τ and value lists differ in length"));
    }
    let mut flags = Vec::new();
    let mut idx = select(taus, values, opts.window);
    if idx.len() < 4 {
        let decays = values
            .iter()
            .zip(taus)
            .any(|(v, t)| *t > 0.0 && v.is_finite() && *v <= 0.8);
        if decays {
            return Err(Error::Insufficient(format!(
                "{} points in the fit window, need at least 4",
                idx.len()
            )));
        }
        flags.push(FitFlag::NonDecaying);
        idx = (0..taus.len())
            .filter(|&i| taus[i] > 0.0 && values[i].is_finite())
            .collect();
        if idx.len() < 4 {
            return Err(Error::Insufficient("fewer than 4 usable points".into()));
        }
    }
    let t: Vec<f64> = idx.iter().map(|&i| taus[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    let window = (t[0], t[t.len() - 1]);

    let start = log_linear(&t, &y, opts.free_amplitude);
    let mut fit = if opts.log_domain && !stretched {
        start.clone()
    } else {
        simple_lm(&t, &y, &start, opts.free_amplitude)
    };
    if stretched {
        fit = stretched_lm(&t, &y, &fit, opts.free_amplitude);
    }
    fit.window = window;
    fit.n_points = t.len();
    if !(fit.gamma > 0.0) {
        flags.push(FitFlag::NonDecaying);
    }
    if stretched && !(fit.stretch > 0.0 && fit.stretch <= 2.0) {
        flags.push(FitFlag::StretchOutOfRange);
    }
    flags.extend(fit.flags.iter().copied());
    flags.dedup();
    fit.flags = flags;
    Ok(fit)
}

fn blank(gamma: f64, amplitude: f64) -> DecayFit {
    DecayFit {
        gamma,
        gamma_err: f64::NAN,
        stretch: 1.0,
        stretch_err: 0.0,
        amplitude,
        window: (0.0, 0.0),
        n_points: 0,
        residual_norm: f64::NAN,
        covariance: Vec::new(),
        iterations: 0,
        flags: Vec::new(),
    }
}

/// ln y = ln A − 2Γτ over positive values.
fn log_linear(t: &[f64], y: &[f64], free_amplitude: bool) -> DecayFit {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return blank(0.0, 1.0);
    }
    let (slope, intercept, cov) = if free_amplitude {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let ssr: f64 = pts.iter().map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
        let s2 = ssr / (n - 2.0).max(1.0);
        (slope, icpt, s2 / sxx)
    } else {
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        let slope = sxy / sxx;
        let ssr: f64 = pts.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
        let s2 = ssr / (pts.len() as f64 - 1.0).max(1.0);
        (slope, 0.0, s2 / sxx)
    };
    let mut f = blank(-slope / 2.0, intercept.exp());
    f.gamma_err = cov.sqrt() / 2.0;
    f.covariance = vec![vec![cov / 4.0]];
    f.residual_norm = t
        .iter()
        .zip(y)
        .map(|(t, y)| (f.amplitude * (-2.0 * f.gamma * t).exp() - y).powi(2))
        .sum::<f64>()
        .sqrt();
    f
}

fn simple_lm(t: &[f64], y: &[f64], start: &DecayFit, free_amplitude: bool) -> DecayFit {
    let mut p0 = vec![start.gamma];
    if free_amplitude {
        p0.push(start.amplitude);
    }
    let out = levenberg_marquardt(p0, |p| {
        let (g, a) = (p[0], if free_amplitude { p[1] } else { 1.0 });
        let mut r = Vec::with_capacity(t.len());
        let mut j = Vec::with_capacity(t.len());
        for (ti, yi) in t.iter().zip(y) {
            let e = (-2.0 * g * ti).exp();
            r.push(a * e - yi);
            let mut row = vec![-2.0 * ti * a * e];
            if free_amplitude {
                row.push(e);
            }
            j.push(row);
        }
        Some((r, j))
    });
    let Some(out) = out else {
        let mut f = start.clone();
        f.flags.push(FitFlag::NotConverged);
        return f;
    };
    let mut f = blank(out.params[0], if free_amplitude { out.params[1] } else { 1.0 });
    f.gamma_err = out.covariance[0][0].sqrt();
    f.residual_norm = out.residual_norm;
    f.iterations = out.iterations;
    f.covariance = out.covariance;
    if !out.converged {
        f.flags.push(FitFlag::NotConverged);
    }
    f
}

fn stretched_lm(t: &[f64], y: &[f64], start: &DecayFit, free_amplitude: bool) -> DecayFit {
    let g0 = if start.gamma > 0.0 {
        start.gamma
    } else {
        1.0 / t[t.len() - 1]
    };
    let mut p0 = vec![g0, 1.0];
    if free_amplitude {
        p0.push(start.amplitude);
    }
    let out = levenberg_marquardt(p0, |p| {
        let (g, s, a) = (p[0], p[1], if free_amplitude { p[2] } else { 1.0 });
        if !(g > 0.0 && s > 0.0 && s <= 4.0) {
            return None;
        }
        let mut r = Vec::with_capacity(t.len());
        let mut j = Vec::with_capacity(t.len());
        for (ti, yi) in t.iter().zip(y) {
            let x = g * ti;
            let xs = x.powf(s);
            let e = (-2.0 * xs).exp();
            r.push(a * e - yi);
            let mut row = vec![
                -2.0 * a * e * s * xs / g,
                if x > 0.0 { -2.0 * a * e * xs * x.ln() } else { 0.0 },
            ];
            if free_amplitude {
                row.push(e);
            }
            j.push(row);
        }
        Some((r, j))
    });
    let Some(out) = out else {
        let mut f = start.clone();
        f.flags.push(FitFlag::NotConverged);
        return f;
    };
    let mut f = blank(out.params[0], if free_amplitude { out.params[2] } else { 1.0 });
    f.stretch = out.params[1];
    f.gamma_err = out.covariance[0][0].sqrt();
    f.stretch_err = out.covariance[1][1].sqrt();
    f.residual_norm = out.residual_norm;
    f.iterations = out.iterations;
    f.covariance = out.covariance;
    if !out.converged {
        f.flags.push(FitFlag::NotConverged);
    }
    f
}

/// Γ(q) with its first local minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionCurve {
    pub q: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gamma_err: Vec<f64>,
    pub stretch: Vec<f64>,
    pub gamma0: Option<f64>,
    pub q_min: Option<f64>,
    /// Γ/Γ0; NaN without a minimum.
    pub normalized: Vec<f64>,
    pub warning: Option<String>,
}

/// Orders fits by q and locates the first interior local minimum of Γ.
/// On a flat-bottomed minimum the smallest q wins.
pub fn dispersion(q: &[f64], fits: &[DecayFit]) -> Result<DispersionCurve> {
    if q.len() != fits.len() {
        return Err(Error::invalid("one q per fit required"));
    }
    if q.len() < 3 {
        return Err(Error::Insufficient("dispersion needs at least 3 rings".into()));
    }
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
    if order.windows(2).any(|w| q[w[0]] == q[w[1]]) {
        return Err(Error::invalid("ring q values must be distinct"));
    }
    let qs: Vec<f64> = order.iter().map(|&i| q[i]).collect();
    let gamma: Vec<f64> = order.iter().map(|&i| fits[i].gamma).collect();
    let minimum = first_local_minimum(&gamma);
    let (gamma0, q_min, warning) = match minimum {
        Some(i) => (Some(gamma[i]), Some(qs[i]), None),
        None => (
            None,
            None,
            Some("Γ(q) has no interior local minimum; Γ0 unset".to_string()),
        ),
    };
    Ok(DispersionCurve {
        normalized: gamma.iter().map(|g| gamma0.map_or(f64::NAN, |g0| g / g0)).collect(),
        gamma_err: order.iter().map(|&i| fits[i].gamma_err).collect(),
        stretch: order.iter().map(|&i| fits[i].stretch).collect(),
        q: qs,
        gamma,
        gamma0,
        q_min,
        warning,
    })
}

fn first_local_minimum(g: &[f64]) -> Option<usize> {
    let n = g.len();
    let mut i = 1;
    while i + 1 < n {
        if g[i] < g[i - 1] {
            let mut j = i;
            while j + 1 < n && g[j + 1] == g[i] {
                j += 1;
            }
            if j + 1 < n && g[j + 1] > g[i] {
                return Some(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    None
}

impl DispersionCurve {
    /// Γ0/q_min², a rough diffusivity in Å²/ps.
    pub fn rough_diffusivity(&self) -> Option<f64> {
        Some(self.gamma0? / self.q_min?.powi(2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffusivityMode {
    /// Γ = Dq² over rings with q ≤ `q_cut`.
    LowQ { q_cut: f64 },
    /// Γ = Dq² + D₂q⁴ over every ring; with `quartic` false, D only.
    FullRange { quartic: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusivityFit {
    /// Å²/ps.
    pub d: f64,
    pub d_err: f64,
    /// Å⁴/ps, quartic fits only.
    pub d2: Option<f64>,
    pub d2_err: Option<f64>,
    pub q_range: (f64, f64),
    pub n_points: usize,
    pub covariance: Vec<Vec<f64>>,
    pub flags: Vec<FitFlag>,
}

impl DiffusivityFit {
    pub fn d_um2_per_s(&self) -> f64 {
        self.d * UM2_PER_S_PER_A2_PER_PS
    }
}

/// Linear least squares of Γ against q² (and q⁴), no intercept.
pub fn fit_diffusivity(curve: &DispersionCurve, mode: DiffusivityMode) -> Result<DiffusivityFit> {
    let (keep, quartic): (Vec<usize>, bool) = match mode {
        DiffusivityMode::LowQ { q_cut } => ((0..curve.q.len()).filter(|&i| curve.q[i] <= q_cut).collect(), false),
        DiffusivityMode::FullRange { quartic } => ((0..curve.q.len()).collect(), quartic),
    };
    let keep: Vec<usize> = keep.into_iter().filter(|&i| curve.gamma[i].is_finite()).collect();
    if keep.len() < 3 {
        return Err(Error::Insufficient(format!(
            "diffusivity fit needs at least 3 rings, {} selected",
            keep.len()
        )));
    }
    let k = if quartic { 2 } else { 1 };
    let rows: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| {
            let q2 = curve.q[i] * curve.q[i];
            if quartic {
                vec![q2, q2 * q2]
            } else {
                vec![q2]
            }
        })
        .collect();
    let y: Vec<f64> = keep.iter().map(|&i| curve.gamma[i]).collect();
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for (row, yi) in rows.iter().zip(&y) {
        for a in 0..k {
            aty[a] += row[a] * yi;
            for b in 0..k {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    let coef = solve(ata.clone(), aty).ok_or_else(|| Error::Insufficient("singular diffusivity fit".into()))?;
    let ssr: f64 = rows
        .iter()
        .zip(&y)
        .map(|(r, yi)| (r.iter().zip(&coef).map(|(a, c)| a * c).sum::<f64>() - yi).powi(2))
        .sum();
    let s2 = ssr / (y.len() - k) as f64;
    let covariance: Vec<Vec<f64>> = lm::invert(ata)
        .map(|inv| inv.iter().map(|r| r.iter().map(|v| v * s2).collect()).collect())
        .unwrap_or_else(|| vec![vec![f64::NAN; k]; k]);
    let mut flags = Vec::new();
    if coef[0] < 0.0 {
        flags.push(FitFlag::NegativeDiffusivity);
    }
    Ok(DiffusivityFit {
        d: coef[0],
        d_err: covariance[0][0].sqrt(),
        d2: quartic.then(|| coef[1]),
        d2_err: quartic.then(|| covariance[1][1].sqrt()),
        q_range: (curve.q[keep[0]], curve.q[keep[keep.len() - 1]]),
        n_points: keep.len(),
        covariance,
        flags,
    })
}
