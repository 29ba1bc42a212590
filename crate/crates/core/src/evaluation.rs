//! Model evaluation: empirical pdf, KL divergence, Q-Q goodness of fit with
//! an R² confidence interval, and likelihood-ratio tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Density, LgmParams, ModelKind};
use crate::error::{check_finite, Error, Result};
use crate::special::gamma_q;
use crate::stats::{self, Fitted, SampleHash};

pub const MIN_GOF_SAMPLES: usize = 30;
pub const AUTO_BINS_MIN: usize = 20;
pub const AUTO_BINS_MAX: usize = 512;
/// Floor applied to model bin masses before taking logarithms.
pub const MODEL_MASS_FLOOR: f64 = 1e-12;
const Z_95: f64 = 1.96;

/// Histogram bin-count selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Bins {
    /// Freedman-Diaconis, clamped to [20, 512].
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Bins {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bins::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("bin count must be at least 1".into()),
            Ok(n) => Ok(Bins::Fixed(n)),
            Err(_) => Err(format!("expected `auto` or a bin count, got `{s}`")),
        }
    }
}

/// Normalized histogram: `mass[b]` is the fraction of samples in
/// `[edges[b], edges[b+1])`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPdf {
    edges: Vec<f64>,
    mass: Vec<f64>,
}

impl EmpiricalPdf {
    pub fn from_parts(edges: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() || edges.len() != mass.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} edges for {} bins",
                edges.len(),
                mass.len()
            )));
        }
        if !edges.windows(2).all(|w| w[0] < w[1]) || !edges.iter().all(|e| e.is_finite()) {
            return Err(Error::InvalidParameter("bin edges must be finite and strictly increasing".into()));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidParameter("bin masses must be non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("bin masses sum to {total}, not 1")));
        }
        Ok(EmpiricalPdf { edges, mass })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bin_count(&self) -> usize {
        self.mass.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Mass divided by bin width, comparable to a model pdf.
    pub fn density(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .zip(&self.mass)
            .map(|(w, m)| m / (w[1] - w[0]))
            .collect()
    }
}

fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman-Diaconis bin count (2·IQR·N^(-1/3) wide), clamped to [20, 512].
pub fn freedman_diaconis_bins(sorted: &[f64]) -> usize {
    let range = sorted[sorted.len() - 1] - sorted[0];
    let iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    if !(width > 0.0) {
        return AUTO_BINS_MAX;
    }
    let n = (range / width).ceil();
    if n.is_finite() {
        (n as usize).clamp(AUTO_BINS_MIN, AUTO_BINS_MAX)
    } else {
        AUTO_BINS_MAX
    }
}

/// Equal-width histogram over `[min(y), max(y)]`.
pub fn empirical_pdf(y: &[f64], bins: Bins) -> Result<EmpiricalPdf> {
    if y.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: y.len(),
        });
    }
    check_finite(y)?;
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(hi > lo) {
        return Err(Error::DegenerateInput("histogram of samples with zero spread".into()));
    }
    let b = match bins {
        Bins::Auto => freedman_diaconis_bins(&sorted),
        Bins::Fixed(0) => return Err(Error::InvalidParameter("bin count must be at least 1".into())),
        Bins::Fixed(n) => n,
    };
    let width = (hi - lo) / b as f64;
    let mut edges: Vec<f64> = (0..b).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    if !edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::DegenerateInput(format!(
            "range {lo}..{hi} too narrow for {b} bins"
        )));
    }

    let mut counts = vec![0usize; b];
    for &v in &sorted {
        let mut idx = (((v - lo) / width) as usize).min(b - 1);
        // the float division can land one bin off near an edge
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < b && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    let n = y.len() as f64;
    let mass = counts.into_iter().map(|c| c as f64 / n).collect();
    Ok(EmpiricalPdf { edges, mass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KldResult {
    /// Divergence in nats.
    pub d_kl: f64,
    /// Bins with non-zero empirical mass.
    pub bins_used: usize,
    pub model_name: String,
}

/// Discrete Kullback-Leibler divergence Σ p ln(p/q), with 0·ln 0 = 0.
///
/// `q` is used as given; callers are responsible for normalization and flooring.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// KL divergence of the histogram against arbitrary per-bin model masses.
/// Masses are floored at [`MODEL_MASS_FLOOR`] and renormalized over the histogram support.
pub fn kld_from_bin_masses(mpdf: &EmpiricalPdf, model_mass: &[f64], model_name: &str) -> Result<KldResult> {
    if model_mass.len() != mpdf.bin_count() {
        return Err(Error::InvalidParameter(format!(
            "{} model masses for {} bins",
            model_mass.len(),
            mpdf.bin_count()
        )));
    }
    let floored: Vec<f64> = model_mass.iter().map(|m| m.max(MODEL_MASS_FLOOR)).collect();
    let total: f64 = floored.iter().sum();
    let q: Vec<f64> = floored.iter().map(|m| m / total).collect();
    Ok(KldResult {
        d_kl: kl_divergence(mpdf.mass(), &q),
        bins_used: mpdf.mass().iter().filter(|m| **m > 0.0).count(),
        model_name: model_name.to_string(),
    })
}

/// KL divergence from the histogram to `model`, with model bin masses taken
/// as CDF differences across the bin edges.
pub fn kld_empirical_vs_model<D: Density + ?Sized>(mpdf: &EmpiricalPdf, model: &D) -> KldResult {
    let masses: Vec<f64> = mpdf
        .edges()
        .windows(2)
        .map(|w| model.interval_mass(w[0], w[1]))
        .collect();
    kld_from_bin_masses(mpdf, &masses, model.kind().as_str()).expect("one mass per bin")
}

/// Q-Q goodness of fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub empirical_q: Vec<f64>,
    pub model_q: Vec<f64>,
    pub r_squared: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// The scalar part of a [`GofResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofSummary {
    pub r_squared: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl GofResult {
    pub fn summary(&self) -> GofSummary {
        GofSummary {
            r_squared: self.r_squared,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }
}

/// Plotting position of the k-th order statistic out of n.
pub fn plotting_position(k: usize, n: usize) -> f64 {
    (k as f64 + 0.5) / n as f64
}

/// 95% interval for R² through the Fisher z-transform of r = √max(R², 0).
pub fn r_squared_ci(r_squared: f64, n: usize) -> (f64, f64) {
    if n <= 3 {
        return (f64::NAN, f64::NAN);
    }
    let r = r_squared.max(0.0).sqrt();
    let z = r.atanh();
    let half = Z_95 / ((n - 3) as f64).sqrt();
    let lo = (z - half).tanh().max(0.0);
    let hi = (z + half).tanh();
    (lo * lo, hi * hi)
}

/// Q-Q goodness of fit against an arbitrary quantile function.
pub fn goodness_of_fit_with<F>(y: &[f64], quantile: F) -> Result<GofResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = y.len();
    if n < MIN_GOF_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_GOF_SAMPLES,
            actual: n,
        });
    }
    check_finite(y)?;
    if stats::has_zero_spread(y) {
        return Err(Error::DegenerateInput("goodness of fit on samples with zero spread".into()));
    }
    let mut empirical_q = y.to_vec();
    empirical_q.sort_by(f64::total_cmp);
    let model_q = (0..n)
        .into_par_iter()
        .map(|k| quantile(plotting_position(k, n)))
        .collect::<Result<Vec<f64>>>()?;

    let mean = stats::mean(&empirical_q);
    let ss_tot: f64 = empirical_q.iter().map(|e| (e - mean) * (e - mean)).sum();
    let ss_res: f64 = empirical_q
        .iter()
        .zip(&model_q)
        .map(|(e, m)| (e - m) * (e - m))
        .sum();
    let r_squared = 1.0 - ss_res / ss_tot;
    let (ci_low, ci_high) = r_squared_ci(r_squared, n);
    Ok(GofResult {
        empirical_q,
        model_q,
        r_squared,
        ci_low,
        ci_high,
    })
}

pub fn goodness_of_fit<D: Density + Sync + ?Sized>(y: &[f64], model: &D) -> Result<GofResult> {
    goodness_of_fit_with(y, |p| model.quantile(p))
}

/// Upper tail of the chi-square distribution, Q(df/2, x/2).
///
/// `df = 0` is the point mass at zero.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if df == 0 {
        return 0.0;
    }
    gamma_q(0.5 * df as f64, 0.5 * x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub t_stat: f64,
    pub df: u32,
    pub p_value: f64,
    pub log_lik_alt: f64,
    pub log_lik_null: f64,
    pub null_model: ModelKind,
    pub alt_model: ModelKind,
}

impl LrtResult {
    /// T = 2(ln L_alt - ln L_null), p from the chi-square tail at max(T, 0).
    pub fn from_log_likelihoods(
        log_lik_alt: f64,
        log_lik_null: f64,
        df: u32,
        alt_model: ModelKind,
        null_model: ModelKind,
    ) -> Self {
        let t_stat = 2.0 * (log_lik_alt - log_lik_null);
        LrtResult {
            t_stat,
            df,
            p_value: chi_square_sf(t_stat.max(0.0), df),
            log_lik_alt,
            log_lik_null,
            null_model,
            alt_model,
        }
    }

    /// Whether the null is rejected at significance level `alpha`.
    pub fn rejects_null(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn check_hash(expected: &SampleHash, actual: &SampleHash) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::MismatchedData {
            expected: expected.to_string(),
            actual: actual.to_string(),
        })
    }
}

/// Likelihood-ratio test of the LGM against a nested single-component null.
/// Degrees of freedom are the difference in free-parameter counts (5 - 2 = 3).
pub fn likelihood_ratio_test<N: Density>(
    y: &[f64],
    lgm: &Fitted<LgmParams>,
    null: &Fitted<N>,
) -> Result<LrtResult> {
    let hash = SampleHash::of(y);
    check_hash(&hash, &lgm.data_hash)?;
    check_hash(&hash, &null.data_hash)?;
    let ll_alt = lgm.params.log_likelihood(y)?;
    let ll_null = null.params.log_likelihood(y)?;
    let df = (lgm.params.free_parameters() - null.params.free_parameters()) as u32;
    Ok(LrtResult::from_log_likelihoods(
        ll_alt,
        ll_null,
        df,
        lgm.params.kind(),
        null.params.kind(),
    ))
}
