//! Laplacian, Gaussian and Laplacian-Gaussian mixture (LGM) densities.
//!
//! All parameter types validate on construction (including deserialization),
//! so every evaluation function below may assume well-formed parameters.
//!
//! The mixture is
//!
//! ```text
//! f(y) = λ₁ · (1/(2σ₁)) exp(-|y-μ₁|/σ₁) + λ₂ · (2πσ₂²)^(-1/2) exp(-(y-μ₂)²/(2σ₂²))
//! ```
//!
//! with λ₂ = 1 - λ₁.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::special::{std_normal_cdf, std_normal_quantile_approx, std_normal_sf};

const QUANTILE_MAX_ITERS: usize = 200;
const QUANTILE_TOL: f64 = 1e-13;

/// Which of the three candidate models a density or result refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lgm,
    Laplacian,
    Gaussian,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lgm, ModelKind::Laplacian, ModelKind::Gaussian];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lgm => "lgm",
            ModelKind::Laplacian => "laplacian",
            ModelKind::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A univariate continuous model that the evaluation routines can score.
pub trait Density {
    fn kind(&self) -> ModelKind;

    /// Number of free parameters, used for likelihood-ratio degrees of freedom.
    fn free_parameters(&self) -> usize;

    fn pdf(&self, y: f64) -> f64;

    fn ln_pdf(&self, y: f64) -> f64;

    fn cdf(&self, y: f64) -> f64;

    fn sf(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }

    fn quantile(&self, prob: f64) -> Result<f64>;

    /// Probability mass on `[a, b]`, taken from whichever tail keeps precision.
    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let lower = self.cdf(a);
        if lower < 0.5 {
            (self.cdf(b) - lower).max(0.0)
        } else {
            (self.sf(a) - self.sf(b)).max(0.0)
        }
    }

    /// Σ ln f(yₙ).
    fn log_likelihood(&self, y: &[f64]) -> Result<f64> {
        if y.is_empty() {
            return Err(Error::EmptyInput("log-likelihood needs at least one sample"));
        }
        check_finite(y)?;
        Ok(y.iter().map(|&v| self.ln_pdf(v)).sum())
    }
}

fn check_prob(prob: f64) -> Result<()> {
    if prob > 0.0 && prob < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "quantile probability must lie in (0, 1), got {prob}"
        )))
    }
}

/// Location/scale of the Laplacian component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaplacian")]
pub struct LaplacianParams {
    mu1: f64,
    sigma1: f64,
}

#[derive(Deserialize)]
struct RawLaplacian {
    mu1: f64,
    sigma1: f64,
}

impl TryFrom<RawLaplacian> for LaplacianParams {
    type Error = Error;
    fn try_from(raw: RawLaplacian) -> Result<Self> {
        LaplacianParams::new(raw.mu1, raw.sigma1)
    }
}

impl LaplacianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("Laplacian location {mu} is not finite")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("Laplacian scale {sigma} must be positive")));
        }
        Ok(LaplacianParams { mu1: mu, sigma1: sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma1
    }
}

impl Density for LaplacianParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Laplacian
    }

    fn free_parameters(&self) -> usize {
        2
    }

    fn pdf(&self, y: f64) -> f64 {
        (1.0 / (2.0 * self.sigma1)) * (-(y - self.mu1).abs() / self.sigma1).exp()
    }

    fn ln_pdf(&self, y: f64) -> f64 {
        -(2.0 * self.sigma1).ln() - (y - self.mu1).abs() / self.sigma1
    }

    fn cdf(&self, y: f64) -> f64 {
        let z = (y - self.mu1) / self.sigma1;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    fn sf(&self, y: f64) -> f64 {
        let z = (y - self.mu1) / self.sigma1;
        if z > 0.0 {
            0.5 * (-z).exp()
        } else {
            1.0 - 0.5 * z.exp()
        }
    }

    fn quantile(&self, prob: f64) -> Result<f64> {
        check_prob(prob)?;
        Ok(if prob < 0.5 {
            self.mu1 + self.sigma1 * (2.0 * prob).ln()
        } else {
            self.mu1 - self.sigma1 * (2.0 * (1.0 - prob)).ln()
        })
    }
}

/// Mean/variance of the Gaussian component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct GaussianParams {
    mu2: f64,
    sigma2_sq: f64,
}

#[derive(Deserialize)]
struct RawGaussian {
    mu2: f64,
    sigma2_sq: f64,
}

impl TryFrom<RawGaussian> for GaussianParams {
    type Error = Error;
    fn try_from(raw: RawGaussian) -> Result<Self> {
        GaussianParams::new(raw.mu2, raw.sigma2_sq)
    }
}

impl GaussianParams {
    pub fn new(mu: f64, variance: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("Gaussian mean {mu} is not finite")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Gaussian variance {variance} must be positive"
            )));
        }
        Ok(GaussianParams {
            mu2: mu,
            sigma2_sq: variance,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu2
    }

    pub fn variance(&self) -> f64 {
        self.sigma2_sq
    }

    pub fn std_dev(&self) -> f64 {
        self.sigma2_sq.sqrt()
    }
}

impl Density for GaussianParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Gaussian
    }

    fn free_parameters(&self) -> usize {
        2
    }

    fn pdf(&self, y: f64) -> f64 {
        let d = y - self.mu2;
        (1.0 / (2.0 * PI * self.sigma2_sq).sqrt()) * (-d * d / (2.0 * self.sigma2_sq)).exp()
    }

    fn ln_pdf(&self, y: f64) -> f64 {
        let d = y - self.mu2;
        -0.5 * (2.0 * PI * self.sigma2_sq).ln() - d * d / (2.0 * self.sigma2_sq)
    }

    fn cdf(&self, y: f64) -> f64 {
        std_normal_cdf((y - self.mu2) / self.std_dev())
    }

    fn sf(&self, y: f64) -> f64 {
        std_normal_sf((y - self.mu2) / self.std_dev())
    }

    fn quantile(&self, prob: f64) -> Result<f64> {
        check_prob(prob)?;
        // Newton polish of the rational approximation against the exact tails.
        let mut z = std_normal_quantile_approx(prob);
        for _ in 0..3 {
            let err = if prob < 0.5 {
                std_normal_cdf(z) - prob
            } else {
                (1.0 - prob) - std_normal_sf(z)
            };
            let dens = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
            if dens <= 0.0 {
                break;
            }
            z -= err / dens;
        }
        Ok(self.mu2 + self.std_dev() * z)
    }
}

/// Full LGM parameter set. `lambda2` is always `1 - lambda1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLgm")]
pub struct LgmParams {
    lambda1: f64,
    lambda2: f64,
    laplacian: LaplacianParams,
    gaussian: GaussianParams,
}

#[derive(Deserialize)]
struct RawLgm {
    lambda1: f64,
    #[serde(default)]
    lambda2: Option<f64>,
    laplacian: LaplacianParams,
    gaussian: GaussianParams,
}

impl TryFrom<RawLgm> for LgmParams {
    type Error = Error;
    fn try_from(raw: RawLgm) -> Result<Self> {
        if let Some(l2) = raw.lambda2 {
            if (raw.lambda1 + l2 - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "mixing weights {} and {l2} do not sum to one",
                    raw.lambda1
                )));
            }
        }
        LgmParams::new(raw.lambda1, raw.laplacian, raw.gaussian)
    }
}

impl LgmParams {
    pub fn new(lambda1: f64, laplacian: LaplacianParams, gaussian: GaussianParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda1) {
            return Err(Error::InvalidParameter(format!(
                "Laplacian weight {lambda1} outside [0, 1]"
            )));
        }
        Ok(LgmParams {
            lambda1,
            lambda2: 1.0 - lambda1,
            laplacian,
            gaussian,
        })
    }

    /// Convenience constructor from the six raw numbers.
    pub fn from_parts(lambda1: f64, mu1: f64, sigma1: f64, mu2: f64, sigma2_sq: f64) -> Result<Self> {
        LgmParams::new(
            lambda1,
            LaplacianParams::new(mu1, sigma1)?,
            GaussianParams::new(mu2, sigma2_sq)?,
        )
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn laplacian(&self) -> &LaplacianParams {
        &self.laplacian
    }

    pub fn gaussian(&self) -> &GaussianParams {
        &self.gaussian
    }

    /// Weighted component log-densities `(ln λ₁f₁(y), ln λ₂f₂(y))`.
    pub fn weighted_ln_components(&self, y: f64) -> (f64, f64) {
        (
            self.lambda1.ln() + self.laplacian.ln_pdf(y),
            self.lambda2.ln() + self.gaussian.ln_pdf(y),
        )
    }
}

pub(crate) fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl Density for LgmParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Lgm
    }

    fn free_parameters(&self) -> usize {
        5
    }

    fn pdf(&self, y: f64) -> f64 {
        self.lambda1 * self.laplacian.pdf(y) + self.lambda2 * self.gaussian.pdf(y)
    }

    fn ln_pdf(&self, y: f64) -> f64 {
        let (a, b) = self.weighted_ln_components(y);
        log_sum_exp2(a, b)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.lambda1 * self.laplacian.cdf(y) + self.lambda2 * self.gaussian.cdf(y)
    }

    fn sf(&self, y: f64) -> f64 {
        self.lambda1 * self.laplacian.sf(y) + self.lambda2 * self.gaussian.sf(y)
    }

    fn quantile(&self, prob: f64) -> Result<f64> {
        check_prob(prob)?;
        let q1 = self.laplacian.quantile(prob)?;
        let q2 = self.gaussian.quantile(prob)?;
        let mut lo = q1.min(q2);
        let mut hi = q1.max(q2);
        let mut width = (hi - lo)
            .max(self.laplacian.sigma())
            .max(self.gaussian.std_dev());

        let mut iterations = 0;
        while self.cdf(lo) > prob {
            lo -= width;
            width *= 2.0;
            iterations += 1;
            if iterations > QUANTILE_MAX_ITERS {
                return Err(Error::NoConvergence {
                    what: "quantile bracketing",
                    iterations,
                });
            }
        }
        while self.cdf(hi) < prob {
            hi += width;
            width *= 2.0;
            iterations += 1;
            if iterations > QUANTILE_MAX_ITERS {
                return Err(Error::NoConvergence {
                    what: "quantile bracketing",
                    iterations,
                });
            }
        }

        for _ in 0..QUANTILE_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            let err = if prob < 0.5 {
                self.cdf(mid) - prob
            } else {
                (1.0 - prob) - self.sf(mid)
            };
            if err.abs() <= QUANTILE_TOL {
                return Ok(mid);
            }
            if err < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NoConvergence {
            what: "quantile bisection",
            iterations: QUANTILE_MAX_ITERS,
        })
    }
}

pub fn laplacian_pdf(y: f64, p: &LaplacianParams) -> f64 {
    p.pdf(y)
}

pub fn gaussian_pdf(y: f64, p: &GaussianParams) -> f64 {
    p.pdf(y)
}

pub fn lgm_pdf(y: f64, p: &LgmParams) -> f64 {
    p.pdf(y)
}

pub fn lgm_log_likelihood(y: &[f64], p: &LgmParams) -> Result<f64> {
    p.log_likelihood(y)
}

pub fn lgm_cdf(y: f64, p: &LgmParams) -> f64 {
    p.cdf(y)
}

pub fn lgm_quantile(prob: f64, p: &LgmParams) -> Result<f64> {
    p.quantile(prob)
}

/// Draws `n` i.i.d. samples from the mixture, deterministically per `seed`.
///
/// The Laplacian branch uses inverse-CDF sampling; the Gaussian branch uses
/// the ziggurat sampler from `rand_distr`.
pub fn sample_lgm(n: usize, p: &LgmParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lap = p.laplacian();
    let gauss = p.gaussian();
    let out = (0..n)
        .map(|_| {
            let pick: f64 = rng.random();
            if pick < p.lambda1() {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                // u in (-0.5, 0.5): F⁻¹ = μ - σ sgn(u) ln(1 - 2|u|)
                lap.mu() - lap.sigma() * u.signum() * (-2.0 * u.abs()).ln_1p()
            } else {
                let z: f64 = rng.sample(StandardNormal);
                gauss.mu() + gauss.std_dev() * z
            }
        })
        .collect();
    Ok(out)
}
