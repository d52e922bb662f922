//! Normalized intensity histograms and Erlang fits.

use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma};
use statrs::function::gamma::ln_gamma;

use super::mean;
use crate::{Error, Result};

/// Erlang density of normalized intensity, M^M κ^(M−1) e^(−Mκ)/Γ(M); M may
/// be fractional.
pub fn erlang_pdf(kappa: f64, m: f64) -> f64 {
    if kappa < 0.0 {
        return 0.0;
    }
    if kappa == 0.0 {
        return if m == 1.0 {
            1.0
        } else if m < 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    (m * m.ln() + (m - 1.0) * kappa.ln() - m * kappa - ln_gamma(m)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
}

/// Pearson test of normalized intensities against Erlang(`m`) using
/// `n_bins` bins of equal model probability. `fitted` counts parameters
/// estimated from the same data (1 when κ was normalized by the sample
/// mean).
pub fn erlang_chi_square(kappa: &[f64], m: f64, n_bins: usize, fitted: usize) -> Result<ChiSquare> {
    if n_bins < fitted + 2 {
        return Err(Error::invalid("too few bins for the fitted parameter count"));
    }
    let model = Gamma::new(m, m).map_err(|e| Error::invalid(format!("Erlang M = {m}: {e}")))?;
    let edges: Vec<f64> = (1..n_bins)
        .map(|i| model.inverse_cdf(i as f64 / n_bins as f64))
        .collect();
    let mut counts = vec![0usize; n_bins];
    for &k in kappa {
        counts[edges.partition_point(|&e| e <= k)] += 1;
    }
    let expected = kappa.len() as f64 / n_bins as f64;
    if expected < 5.0 {
        return Err(Error::Insufficient(format!(
            "{} samples give fewer than 5 expected per bin over {n_bins} bins",
            kappa.len()
        )));
    }
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = n_bins - 1 - fitted;
    let p_value = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(statistic);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
        bins: n_bins,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramFit {
    /// Bin centres of κ = I/⟨I⟩.
    pub kappa: Vec<f64>,
    pub density: Vec<f64>,
    /// Erlang density at the bin centres for the rounded M.
    pub erlang: Vec<f64>,
    /// mean²/variance of the samples.
    pub m_hat: f64,
    pub m_round: usize,
    /// Against Erlang(M̂ rounded), with the mean and M counted as fitted.
    pub chi_square: ChiSquare,
    pub samples: usize,
}

/// Histogram of κ = I/⟨I⟩ over `[0, max κ]` with a moment Erlang fit.
pub fn intensity_histogram(samples: &[f64], n_bins: usize) -> Result<HistogramFit> {
    if samples.len() < 100 {
        return Err(Error::Insufficient(format!(
            "histogram fit needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if n_bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let mu = mean(samples);
    if !(mu > 0.0) {
        return Err(Error::Insufficient("samples have zero mean".into()));
    }
    let kappa: Vec<f64> = samples.iter().map(|v| v / mu).collect();
    let var = kappa.iter().map(|k| (k - 1.0).powi(2)).sum::<f64>() / kappa.len() as f64;
    let m_hat = 1.0 / var;
    let m_round = (m_hat.round() as usize).max(1);

    let top = kappa.iter().cloned().fold(0.0, f64::max);
    let width = top / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &k in &kappa {
        counts[((k / width) as usize).min(n_bins - 1)] += 1;
    }
    let centres: Vec<f64> = (0..n_bins).map(|i| (i as f64 + 0.5) * width).collect();
    let density = counts
        .iter()
        .map(|&c| c as f64 / (kappa.len() as f64 * width))
        .collect();
    let erlang = centres.iter().map(|&k| erlang_pdf(k, m_round as f64)).collect();
    let chi_bins = (kappa.len() / 50).clamp(4, 50);
    let chi_square = erlang_chi_square(&kappa, m_round as f64, chi_bins, 2)?;
    Ok(HistogramFit {
        kappa: centres,
        density,
        erlang,
        m_hat,
        m_round,
        chi_square,
        samples: kappa.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erlang_one_is_exponential() {
        for k in [0.1, 1.0, 3.0] {
            assert!((erlang_pdf(k, 1.0) - (-k).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn erlang_integrates_to_one() {
        for m in [1.0, 5.0, 20.0] {
            let h = 1e-4;
            let total: f64 = (0..100_000).map(|i| erlang_pdf((i as f64 + 0.5) * h, m) * h).sum();
            assert!((total - 1.0).abs() < 1e-4, "M = {m}: {total}");
        }
    }
}
