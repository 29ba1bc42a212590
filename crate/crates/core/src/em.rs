//! Expectation-maximization for the Laplacian-Gaussian mixture, plus the
//! closed-form single-component baselines.
//!
//! One EM iteration:
//!
//! * E-step: γₙ,ⱼ = λⱼfⱼ(yₙ) / Σᵢ λᵢfᵢ(yₙ), evaluated in log space.
//! * M-step, with N₁ = Σ γₙ,₁ and N₂ = N - N₁:
//!   - λ₁ = N₁/N, λ₂ = N₂/N
//!   - μ₁ = weighted median of y under weights γ·,₁
//!   - σ₁ = (1/N₁) Σ γₙ,₁ |yₙ - μ₁|
//!   - μ₂ = (1/N₂) Σ γₙ,₂ yₙ
//!   - σ₂² = (1/N₂) Σ γₙ,₂ (yₙ - μ₂)²
//!
//! The scale updates use the location computed in the same iteration, which
//! makes each M-step the exact maximizer of the expected complete-data
//! log-likelihood. Floors on scales and weights clip that maximizer to a
//! box, which keeps the likelihood bounded and preserves monotone ascent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Density, GaussianParams, LaplacianParams, LgmParams};
use crate::error::{check_finite, Error, Result};
use crate::stats::{self, Fitted, SampleHash};

/// Minimum sample count accepted by [`fit_lgm`].
pub const MIN_FIT_SAMPLES: usize = 10;

/// Posterior membership probabilities, one `[laplacian, gaussian]` row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    rows: Vec<[f64; 2]>,
}

impl Responsibilities {
    /// Builds responsibilities from the Laplacian column; the Gaussian column is `1 - γ₁`.
    pub fn from_laplacian(gamma1: &[f64]) -> Result<Self> {
        if let Some(bad) = gamma1.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidParameter(format!(
                "responsibility {bad} outside [0, 1]"
            )));
        }
        Ok(Responsibilities {
            rows: gamma1.iter().map(|&g| [g, 1.0 - g]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn laplacian(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r[0])
    }

    pub fn gaussian(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r[1])
    }

    /// Effective Laplacian count N₁.
    pub fn n1(&self) -> f64 {
        self.laplacian().sum()
    }

    /// Effective Gaussian count N₂.
    pub fn n2(&self) -> f64 {
        self.gaussian().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Threshold on the squared change of the normalized parameter vector.
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    /// Minimum scale, as a fraction of the sample standard deviation.
    pub sigma_floor: f64,
    /// Minimum mixing weight for either component.
    pub lambda_floor: f64,
    /// Restart chains that come within this normalized distance of a chain
    /// with a higher log-likelihood are dropped as duplicates. Zero runs every
    /// chain to the end.
    #[serde(default = "default_merge_distance")]
    pub merge_distance: f64,
    /// Try a squared-extrapolation jump after every two EM steps, kept only
    /// when it does not lower the log-likelihood.
    #[serde(default = "default_accelerate")]
    pub accelerate: bool,
}

fn default_accelerate() -> bool {
    true
}

fn default_merge_distance() -> f64 {
    1e-3
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tol: 1e-10,
            max_iter: 500,
            n_restarts: 5,
            sigma_floor: 1e-8,
            lambda_floor: 1e-6,
            merge_distance: default_merge_distance(),
            accelerate: default_accelerate(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.n_restarts == 0 {
            return bad("n_restarts must be at least 1");
        }
        if !(self.sigma_floor > 0.0) {
            return bad("sigma_floor must be positive");
        }
        if !(0.0..0.5).contains(&self.lambda_floor) {
            return bad("lambda_floor must lie in [0, 0.5)");
        }
        if !(self.merge_distance >= 0.0) {
            return bad("merge_distance must be non-negative");
        }
        Ok(())
    }
}

/// Absolute floors applied inside the M-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floors {
    /// Minimum σ₁ and minimum σ₂ (so σ₂² ≥ sigma²), in signal units.
    pub sigma: f64,
    pub lambda: f64,
}

impl Floors {
    /// Floors that only guard against exact zeros.
    pub fn minimal() -> Self {
        Floors {
            sigma: f64::MIN_POSITIVE,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    /// Log-likelihood of the starting parameters.
    pub initial_log_likelihood: f64,
    /// Log-likelihood after each M-step.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: LgmParams,
    pub trace: EmTrace,
    pub final_loglik: f64,
    pub n1: f64,
    pub n2: f64,
    /// Index of the restart chain that won.
    pub restart: usize,
    pub data_hash: SampleHash,
}

impl FitResult {
    pub fn fitted(&self) -> Fitted<LgmParams> {
        Fitted {
            params: self.params,
            data_hash: self.data_hash.clone(),
        }
    }
}

/// E-step into a reusable buffer. Returns Σ ln f(yₙ) for the supplied parameters.
fn e_step_into(y: &[f64], p: &LgmParams, rows: &mut Vec<[f64; 2]>) -> Result<f64> {
    // Products of (1 + e) stay within [1, 2^CHUNK], so the log-sum needs only
    // one logarithm per chunk.
    const CHUNK: usize = 64;
    let (lap, gauss) = (p.laplacian(), p.gaussian());
    let c1 = p.lambda1().ln() - (2.0 * lap.sigma()).ln();
    let inv_sigma1 = 1.0 / lap.sigma();
    let c2 = p.lambda2().ln() - 0.5 * (2.0 * std::f64::consts::PI * gauss.variance()).ln();
    let inv_two_var = 1.0 / (2.0 * gauss.variance());

    rows.clear();
    rows.reserve(y.len());
    let mut loglik = 0.0;
    for (c, chunk) in y.chunks(CHUNK).enumerate() {
        let mut max_sum = 0.0;
        let mut prod = 1.0;
        for &v in chunk {
            let a = c1 - (v - lap.mu()).abs() * inv_sigma1;
            let d = v - gauss.mu();
            let b = c2 - d * d * inv_two_var;
            // ln(eᵃ + eᵇ) = max + ln(1 + e^(-|a-b|))
            let e = (-(a - b).abs()).exp();
            max_sum += a.max(b);
            prod *= 1.0 + e;
            let hi = 1.0 / (1.0 + e);
            let lo = e * hi;
            rows.push(if a >= b { [hi, lo] } else { [lo, hi] });
        }
        if !max_sum.is_finite() {
            let start = c * CHUNK;
            let index = start
                + chunk
                    .iter()
                    .position(|&v| !p.ln_pdf(v).is_finite())
                    .unwrap_or(0);
            return Err(Error::DegenerateDensity { index, value: y[index] });
        }
        loglik += max_sum + prod.ln();
    }
    Ok(loglik)
}

pub fn e_step(y: &[f64], p: &LgmParams) -> Result<Responsibilities> {
    if y.is_empty() {
        return Err(Error::EmptyInput("e_step needs at least one sample"));
    }
    check_finite(y)?;
    let mut rows = Vec::new();
    e_step_into(y, p, &mut rows)?;
    Ok(Responsibilities { rows })
}

/// Weighted median: the smallest value at which the cumulative weight reaches
/// half of the total, i.e. the lower endpoint of arg min_m Σ wₙ|yₙ - m|.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("weighted median of no values"));
    }
    if values.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let w: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    weighted_median_sorted(&sorted, &w)
}

/// [`weighted_median`] for values already in ascending order.
pub(crate) fn weighted_median_sorted(sorted: &[f64], weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyInput("weighted median with zero total weight"));
    }
    // Compare left mass against right mass directly instead of against
    // total/2, so exactly balanced weights tie-break to the lower value.
    let mut cum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // absorb runs of equal values together
        let v = sorted[i];
        while i < sorted.len() && sorted[i] == v {
            cum += weights[i];
            i += 1;
        }
        if cum >= total - cum {
            return Ok(v);
        }
    }
    Ok(sorted[sorted.len() - 1])
}

/// M-step: the six closed-form updates, clipped to `floors`.
///
/// A component whose effective count is zero keeps its previous location
/// and scale; only its weight changes.
pub fn m_step(
    y: &[f64],
    gamma: &Responsibilities,
    prev: &LgmParams,
    floors: &Floors,
) -> Result<LgmParams> {
    if y.len() != gamma.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples but {} responsibility rows",
            y.len(),
            gamma.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("m_step needs at least one sample"));
    }
    if y.is_sorted_by(|a, b| a <= b) {
        m_step_sorted(y, gamma, prev, floors)
    } else {
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let gs = Responsibilities {
            rows: order.iter().map(|&i| gamma.rows[i]).collect(),
        };
        m_step_sorted(&ys, &gs, prev, floors)
    }
}

fn m_step_sorted(
    y: &[f64],
    gamma: &Responsibilities,
    prev: &LgmParams,
    floors: &Floors,
) -> Result<LgmParams> {
    let n = y.len() as f64;
    let g1: Vec<f64> = gamma.laplacian().collect();
    let n1: f64 = g1.iter().sum();
    let n2: f64 = gamma.n2();

    let lambda1 = (n1 / n).clamp(floors.lambda, 1.0 - floors.lambda);

    let laplacian = if n1 > 0.0 {
        let mu1 = weighted_median_sorted(y, &g1)?;
        let abs_dev: f64 = y.iter().zip(&g1).map(|(v, g)| g * (v - mu1).abs()).sum();
        LaplacianParams::new(mu1, (abs_dev / n1).max(floors.sigma))?
    } else {
        *prev.laplacian()
    };

    let gaussian = if n2 > 0.0 {
        let mu2 = gamma.gaussian().zip(y).map(|(g, v)| g * v).sum::<f64>() / n2;
        let sq_dev: f64 = gamma
            .gaussian()
            .zip(y)
            .map(|(g, v)| g * (v - mu2) * (v - mu2))
            .sum();
        GaussianParams::new(mu2, (sq_dev / n2).max(floors.sigma * floors.sigma))?
    } else {
        *prev.gaussian()
    };

    LgmParams::new(lambda1, laplacian, gaussian)
}

/// Moment/median starting point: λ₁ = 0.5, Laplacian at (median, mean absolute
/// deviation about the median), Gaussian at (mean, variance).
pub fn init_params(y: &[f64]) -> Result<LgmParams> {
    if y.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: y.len(),
        });
    }
    check_finite(y)?;
    if stats::has_zero_spread(y) {
        return Err(Error::DegenerateInput("all samples are identical".into()));
    }
    let median = stats::lower_median(y);
    LgmParams::from_parts(
        0.5,
        median,
        stats::mean_abs_deviation(y, median),
        stats::mean(y),
        stats::variance(y),
    )
}

/// Starting point for restart chain `restart`. Chain 0 is [`init_params`];
/// later chains shift both locations by ±0.1·s and rescale both scales by
/// 0.5 or 2, with signs and factors drawn from `seed`.
pub fn restart_params(y: &[f64], restart: usize, seed: u64) -> Result<LgmParams> {
    let base = init_params(y)?;
    if restart == 0 {
        return Ok(base);
    }
    let s = stats::variance(y).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let mut shift = || if rng.random::<bool>() { 0.1 * s } else { -0.1 * s };
    let (d1, d2) = (shift(), shift());
    let mut factor = || if rng.random::<bool>() { 2.0 } else { 0.5 };
    let (f1, f2) = (factor(), factor());
    LgmParams::from_parts(
        base.lambda1(),
        base.laplacian().mu() + d1,
        base.laplacian().sigma() * f1,
        base.gaussian().mu() + d2,
        base.gaussian().variance() * f2 * f2,
    )
}

fn clip_to_floors(p: &LgmParams, floors: &Floors) -> Result<LgmParams> {
    LgmParams::from_parts(
        p.lambda1().clamp(floors.lambda, 1.0 - floors.lambda),
        p.laplacian().mu(),
        p.laplacian().sigma().max(floors.sigma),
        p.gaussian().mu(),
        p.gaussian().variance().max(floors.sigma * floors.sigma),
    )
}

fn normalized_sq_change(a: &LgmParams, b: &LgmParams, scale: f64) -> f64 {
    let d = [
        a.lambda1() - b.lambda1(),
        (a.laplacian().mu() - b.laplacian().mu()) / scale,
        (a.laplacian().sigma() - b.laplacian().sigma()) / scale,
        (a.gaussian().mu() - b.gaussian().mu()) / scale,
        (a.gaussian().std_dev() - b.gaussian().std_dev()) / scale,
    ];
    d.iter().map(|x| x * x).sum()
}

/// Coordinates for extrapolation: logit weight, locations and log scales in
/// units of the sample scale, so every point maps back to valid parameters.
fn to_coords(p: &LgmParams, scale: f64) -> [f64; 5] {
    let l = p.lambda1();
    [
        (l / (1.0 - l)).ln(),
        p.laplacian().mu() / scale,
        (p.laplacian().sigma() / scale).ln(),
        p.gaussian().mu() / scale,
        (p.gaussian().std_dev() / scale).ln(),
    ]
}

fn from_coords(x: &[f64; 5], scale: f64, floors: &Floors) -> Result<LgmParams> {
    let lambda1 = 1.0 / (1.0 + (-x[0]).exp());
    let sigma2 = x[4].exp() * scale;
    clip_to_floors(
        &LgmParams::from_parts(lambda1, x[1] * scale, x[2].exp() * scale, x[3] * scale, sigma2 * sigma2)?,
        floors,
    )
}

/// Largest extrapolation step length tried.
const MAX_STEP: f64 = 64.0;

struct Chain {
    params: LgmParams,
    gamma: Responsibilities,
    initial: f64,
    lls: Vec<f64>,
    converged: bool,
    /// Plain EM iterates since the last extrapolation attempt.
    cycle: Vec<LgmParams>,
}

impl Chain {
    fn start(sorted: &[f64], start: LgmParams, floors: &Floors) -> Result<Self> {
        let params = clip_to_floors(&start, floors)?;
        let mut rows = Vec::new();
        let initial = e_step_into(sorted, &params, &mut rows)?;
        Ok(Chain {
            params,
            gamma: Responsibilities { rows },
            initial,
            lls: Vec::new(),
            converged: false,
            cycle: vec![params],
        })
    }

    fn log_likelihood(&self) -> f64 {
        self.lls.last().copied().unwrap_or(self.initial)
    }

    /// Runs until convergence, `cfg.max_iter` total iterations, or `budget`
    /// more iterations, whichever comes first.
    fn advance(&mut self, sorted: &[f64], cfg: &EmConfig, floors: &Floors, scale: f64, budget: usize) -> Result<()> {
        let mut scratch = Vec::with_capacity(sorted.len());
        let mut steps = 0;
        while !self.converged && self.lls.len() < cfg.max_iter && steps < budget {
            let next = m_step_sorted(sorted, &self.gamma, &self.params, floors)?;
            let ll = e_step_into(sorted, &next, &mut scratch)?;
            std::mem::swap(&mut self.gamma.rows, &mut scratch);
            let change = normalized_sq_change(&self.params, &next, scale);
            self.params = next;
            self.lls.push(ll);
            self.converged = change < cfg.tol;
            steps += 1;

            if cfg.accelerate && !self.converged {
                self.cycle.push(next);
                if self.cycle.len() == 3 {
                    if self.lls.len() < cfg.max_iter && steps < budget && self.try_extrapolate(sorted, floors, scale, &mut scratch) {
                        steps += 1;
                    }
                    self.cycle.clear();
                    self.cycle.push(self.params);
                }
            }
        }
        Ok(())
    }

    /// Squared-extrapolation jump from the last two EM steps (θ₀ → θ₁ → θ₂).
    /// Kept only if it does not lower the log-likelihood, so the chain
    /// still ascends monotonically.
    fn try_extrapolate(&mut self, sorted: &[f64], floors: &Floors, scale: f64, scratch: &mut Vec<[f64; 2]>) -> bool {
        let [x0, x1, x2] = [0, 1, 2].map(|i| to_coords(&self.cycle[i], scale));
        let r: [f64; 5] = std::array::from_fn(|k| x1[k] - x0[k]);
        let v: [f64; 5] = std::array::from_fn(|k| x2[k] - 2.0 * x1[k] + x0[k]);
        let norm = |a: &[f64; 5]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (nr, nv) = (norm(&r), norm(&v));
        if !(nv > 0.0) || !(nr > 0.0) {
            return false;
        }
        let alpha = -(nr / nv).min(MAX_STEP);
        if alpha >= -1.0 {
            return false;
        }
        let x: [f64; 5] = std::array::from_fn(|k| x0[k] - 2.0 * alpha * r[k] + alpha * alpha * v[k]);
        if x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        let Ok(candidate) = from_coords(&x, scale, floors) else {
            return false;
        };
        let Ok(ll) = e_step_into(sorted, &candidate, scratch) else {
            return false;
        };
        if ll < self.log_likelihood() {
            return false;
        }
        std::mem::swap(&mut self.gamma.rows, scratch);
        self.params = candidate;
        self.lls.push(ll);
        true
    }

    fn n1(&self) -> f64 {
        self.gamma.n1()
    }

    fn n2(&self) -> f64 {
        self.gamma.n2()
    }

    fn into_trace(self) -> EmTrace {
        EmTrace {
            initial_log_likelihood: self.initial,
            iterations: self.lls.len(),
            log_likelihoods: self.lls,
            converged: self.converged,
        }
    }
}

struct Prepared {
    sorted: Vec<f64>,
    scale: f64,
    floors: Floors,
}

fn prepare(y: &[f64], cfg: &EmConfig) -> Result<Prepared> {
    cfg.validate()?;
    if y.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_FIT_SAMPLES,
            actual: y.len(),
        });
    }
    check_finite(y)?;
    if stats::has_zero_spread(y) {
        return Err(Error::DegenerateInput("all samples are identical".into()));
    }
    let scale = stats::variance(y).sqrt();
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Prepared {
        sorted,
        scale,
        floors: Floors {
            sigma: cfg.sigma_floor * scale,
            lambda: cfg.lambda_floor,
        },
    })
}

/// A single EM chain from a caller-chosen start.
#[derive(Debug, Clone, PartialEq)]
pub struct EmChain {
    pub params: LgmParams,
    pub trace: EmTrace,
    pub n1: f64,
    pub n2: f64,
}

/// Runs one EM chain from `start` (clipped to the configured floors first).
/// `cfg.n_restarts` is ignored.
pub fn run_em(y: &[f64], start: &LgmParams, cfg: &EmConfig) -> Result<EmChain> {
    let prep = prepare(y, cfg)?;
    let mut chain = Chain::start(&prep.sorted, *start, &prep.floors)?;
    chain.advance(&prep.sorted, cfg, &prep.floors, prep.scale, usize::MAX)?;
    Ok(EmChain {
        params: chain.params,
        n1: chain.n1(),
        n2: chain.n2(),
        trace: chain.into_trace(),
    })
}

/// Iterations between duplicate checks across restart chains.
const MERGE_CHECK_EVERY: usize = 10;

/// Fits the mixture by EM from `cfg.n_restarts` starting points and keeps
/// the chain with the highest final log-likelihood (lowest index on ties).
///
/// Chains advance in lockstep. Once a chain comes within `cfg.merge_distance`
/// (normalized) of a chain with a higher log-likelihood, both are in the
/// same basin and the lower one is dropped. Chains that fail are dropped
/// too; the fit fails only if all do.
pub fn fit_lgm(y: &[f64], cfg: &EmConfig, seed: u64) -> Result<FitResult> {
    let Prepared { sorted, scale, floors } = prepare(y, cfg)?;
    let merge_sq = cfg.merge_distance * cfg.merge_distance;

    let mut first_err = None;
    let mut chains: Vec<Option<Chain>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| Chain::start(&sorted, restart_params(&sorted, r, seed)?, &floors))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|c| c.map_err(|e| first_err.get_or_insert(e)).ok())
        .collect();

    loop {
        let results: Vec<Result<()>> = chains
            .par_iter_mut()
            .map(|slot| match slot {
                Some(c) => c.advance(&sorted, cfg, &floors, scale, MERGE_CHECK_EVERY),
                None => Ok(()),
            })
            .collect();
        for (slot, r) in chains.iter_mut().zip(results) {
            if let Err(e) = r {
                *slot = None;
                first_err.get_or_insert(e);
            }
        }
        if merge_sq > 0.0 {
            drop_duplicates(&mut chains, merge_sq, scale);
        }
        let running = |c: &Chain| !c.converged && c.lls.len() < cfg.max_iter;
        if !chains.iter().flatten().any(running) {
            break;
        }
    }

    let mut best: Option<(usize, Chain)> = None;
    for (r, chain) in chains.into_iter().enumerate() {
        if let Some(c) = chain {
            if best.as_ref().is_none_or(|(_, b)| c.log_likelihood() > b.log_likelihood()) {
                best = Some((r, c));
            }
        }
    }
    let Some((restart, chain)) = best else {
        return Err(first_err.expect("at least one chain ran"));
    };
    Ok(FitResult {
        params: chain.params,
        n1: chain.n1(),
        n2: chain.n2(),
        final_loglik: chain.log_likelihood(),
        trace: chain.into_trace(),
        restart,
        data_hash: SampleHash::of(y),
    })
}

/// Drops every chain lying within the merge radius of a chain with a higher
/// log-likelihood (or an equal one and a lower index).
fn drop_duplicates(chains: &mut [Option<Chain>], merge_sq: f64, scale: f64) {
    let n = chains.len();
    let mut dropped = vec![false; n];
    for i in 0..n {
        let Some(a) = &chains[i] else { continue };
        for j in 0..n {
            let Some(b) = &chains[j] else { continue };
            if i == j || dropped[j] {
                continue;
            }
            let b_wins = b.log_likelihood() > a.log_likelihood() || (b.log_likelihood() == a.log_likelihood() && j < i);
            if b_wins && normalized_sq_change(&a.params, &b.params, scale) < merge_sq {
                dropped[i] = true;
                break;
            }
        }
    }
    for (slot, d) in chains.iter_mut().zip(dropped) {
        if d {
            *slot = None;
        }
    }
}

fn check_baseline_input(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: y.len(),
        });
    }
    check_finite(y)?;
    if stats::has_zero_spread(y) {
        return Err(Error::DegenerateInput("all samples are identical".into()));
    }
    Ok(())
}

/// Laplacian maximum likelihood: lower median and mean absolute deviation.
pub fn fit_laplacian(y: &[f64]) -> Result<LaplacianParams> {
    check_baseline_input(y)?;
    let median = stats::lower_median(y);
    LaplacianParams::new(median, stats::mean_abs_deviation(y, median))
}

/// Gaussian maximum likelihood (variance with 1/N).
pub fn fit_gaussian(y: &[f64]) -> Result<GaussianParams> {
    check_baseline_input(y)?;
    GaussianParams::new(stats::mean(y), stats::variance(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{gaussian_pdf, laplacian_pdf, sample_lgm};

    #[test]
    fn e_step_all_laplacian_weight() {
        let p = LgmParams::from_parts(1.0, 0.0, 1.0, 0.5, 2.0).unwrap();
        let g = e_step(&[-3.0, 0.0, 0.2, 5.0], &p).unwrap();
        assert!(g.laplacian().all(|v| v == 1.0));
        assert!(g.gaussian().all(|v| v == 0.0));
    }

    #[test]
    fn e_step_hand_value() {
        let p = LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let g = e_step(&[0.0], &p).unwrap();
        // 0.25 / (0.25 + 0.5/sqrt(2π))
        let expected = 0.25 / (0.25 + 0.5 / (2.0 * std::f64::consts::PI).sqrt());
        assert!((g.rows()[0][0] - expected).abs() < 1e-14);
        assert!((g.rows()[0][0] - 0.556_209).abs() < 1e-6);
    }

    #[test]
    fn e_step_at_density_crossing_returns_prior() {
        let lap = LaplacianParams::new(0.0, 1.0).unwrap();
        let gauss = GaussianParams::new(0.0, 1.0).unwrap();
        // f1(0) > f2(0) and f1(1) < f2(1): bisect the crossing.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if laplacian_pdf(mid, &lap) > gaussian_pdf(mid, &gauss) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y_star = 0.5 * (lo + hi);
        for &l1 in &[0.2, 0.5, 0.9] {
            let p = LgmParams::new(l1, lap, gauss).unwrap();
            let g = e_step(&[y_star], &p).unwrap();
            assert!((g.rows()[0][0] - l1).abs() < 1e-12, "λ₁={l1}: {:?}", g.rows()[0]);
        }
    }

    #[test]
    fn e_step_rows_are_normalized() {
        let p = LgmParams::from_parts(0.3, 0.2, 0.5, -1.0, 4.0).unwrap();
        let y: Vec<f64> = (-200..200).map(|i| i as f64 * 0.7).collect();
        let g = e_step(&y, &p).unwrap();
        for r in g.rows() {
            assert!((0.0..=1.0).contains(&r[0]) && (0.0..=1.0).contains(&r[1]));
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
        assert!(e_step(&[], &p).is_err());
        assert!(e_step(&[f64::NAN], &p).is_err());
    }

    #[test]
    fn weighted_median_examples() {
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[0.1, 0.1, 0.8]).unwrap(), 3.0);
        assert_eq!(weighted_median(&[1.0, 3.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(weighted_median(&[3.0, 1.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(weighted_median(&[5.0, 5.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(), 5.0);
        assert!(matches!(weighted_median(&[], &[]), Err(Error::EmptyInput(_))));
        assert!(weighted_median(&[1.0], &[0.0]).is_err());
        assert!(weighted_median(&[1.0, 2.0], &[1.0]).is_err());
        assert!(weighted_median(&[1.0, 2.0], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn m_step_reduces_to_laplacian_mle() {
        let y = [1.0, 2.0, 3.0];
        let g = Responsibilities::from_laplacian(&[1.0, 1.0, 1.0]).unwrap();
        let prev = LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let p = m_step(&y, &g, &prev, &Floors::minimal()).unwrap();
        assert_eq!(p.lambda1(), 1.0);
        assert_eq!(p.laplacian().mu(), 2.0);
        assert!((p.laplacian().sigma() - 2.0 / 3.0).abs() < 1e-15);
        // empty Gaussian component keeps its previous values
        assert_eq!(p.gaussian(), prev.gaussian());
    }

    #[test]
    fn m_step_reduces_to_gaussian_mle() {
        let y = [-1.0, 1.0];
        let g = Responsibilities::from_laplacian(&[0.0, 0.0]).unwrap();
        let prev = LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let p = m_step(&y, &g, &prev, &Floors::minimal()).unwrap();
        assert_eq!(p.lambda2(), 1.0);
        assert_eq!(p.gaussian().mu(), 0.0);
        assert_eq!(p.gaussian().variance(), 1.0);
    }

    #[test]
    fn m_step_applies_floors() {
        let y = [0.0, 0.0, 0.0, 1.0];
        let g = Responsibilities::from_laplacian(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        let prev = LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let floors = Floors { sigma: 1e-3, lambda: 0.3 };
        let p = m_step(&y, &g, &prev, &floors).unwrap();
        assert_eq!(p.lambda1(), 0.7);
        assert_eq!(p.laplacian().sigma(), 1e-3);
        assert_eq!(p.gaussian().variance(), 1e-6);
    }

    #[test]
    fn m_step_handles_unsorted_input() {
        let y = [3.0, -1.0, 2.0, 0.5, 7.0];
        let g1 = [0.9, 0.1, 0.4, 0.7, 0.2];
        let prev = LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let g = Responsibilities::from_laplacian(&g1).unwrap();
        let p = m_step(&y, &g, &prev, &Floors::minimal()).unwrap();

        let mut idx: Vec<usize> = (0..5).collect();
        idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let gs: Vec<f64> = idx.iter().map(|&i| g1[i]).collect();
        let q = m_step(&ys, &Responsibilities::from_laplacian(&gs).unwrap(), &prev, &Floors::minimal())
            .unwrap();
        assert_eq!(p.laplacian().mu(), q.laplacian().mu());
        assert!((p.laplacian().sigma() - q.laplacian().sigma()).abs() < 1e-14);
        assert!((p.gaussian().mu() - q.gaussian().mu()).abs() < 1e-14);
        assert!((p.lambda1() - q.lambda1()).abs() < 1e-15);
    }

    #[test]
    fn init_examples() {
        let p = init_params(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.lambda1(), 0.5);
        assert_eq!(p.laplacian().mu(), 0.0);
        assert!((p.laplacian().sigma() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.gaussian().mu(), 0.0);
        assert!((p.gaussian().variance() - 2.0 / 3.0).abs() < 1e-15);

        assert!(matches!(init_params(&[4.0; 20]), Err(Error::DegenerateInput(_))));
        assert!(matches!(init_params(&[1.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn restarts_are_seeded_perturbations() {
        let p = LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 4.0).unwrap();
        let y = sample_lgm(500, &p, 3).unwrap();
        let base = init_params(&y).unwrap();
        let s = stats::variance(&y).sqrt();
        assert_eq!(restart_params(&y, 0, 11).unwrap(), base);
        for r in 1..6 {
            let a = restart_params(&y, r, 11).unwrap();
            assert_eq!(a, restart_params(&y, r, 11).unwrap());
            assert!(((a.laplacian().mu() - base.laplacian().mu()).abs() - 0.1 * s).abs() < 1e-12);
            assert!(((a.gaussian().mu() - base.gaussian().mu()).abs() - 0.1 * s).abs() < 1e-12);
            let f = a.laplacian().sigma() / base.laplacian().sigma();
            assert!((f - 2.0).abs() < 1e-12 || (f - 0.5).abs() < 1e-12);
            let f = a.gaussian().std_dev() / base.gaussian().std_dev();
            assert!((f - 2.0).abs() < 1e-12 || (f - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_examples() {
        let l = fit_laplacian(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(l.mu(), 2.0);
        assert!((l.sigma() - 2.0 / 3.0).abs() < 1e-15);
        let l = fit_laplacian(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!((l.mu(), l.sigma()), (0.0, 1.0));

        let g = fit_gaussian(&[-1.0, 1.0]).unwrap();
        assert_eq!((g.mu(), g.variance()), (0.0, 1.0));
        let g = fit_gaussian(&[1.0, 1.0, 1.0, 5.0]).unwrap();
        assert_eq!((g.mu(), g.variance()), (2.0, 3.0));

        assert!(matches!(fit_laplacian(&[2.0, 2.0]), Err(Error::DegenerateInput(_))));
        assert!(matches!(fit_gaussian(&[2.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn baselines_recover_generator() {
        let lap = LgmParams::from_parts(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let y = sample_lgm(1_000_000, &lap, 21).unwrap();
        assert!((fit_laplacian(&y).unwrap().sigma() - 1.0).abs() < 0.01);
        let gauss = LgmParams::from_parts(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let y = sample_lgm(1_000_000, &gauss, 22).unwrap();
        assert!((fit_gaussian(&y).unwrap().variance() - 1.0).abs() < 0.01);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let cfg = EmConfig::default();
        assert!(matches!(fit_lgm(&[1.0; 5], &cfg, 0), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_lgm(&[1.0; 50], &cfg, 0), Err(Error::DegenerateInput(_))));
        let mut y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        y[3] = f64::INFINITY;
        assert!(matches!(fit_lgm(&y, &cfg, 0), Err(Error::NonFiniteSample { index: 3, .. })));
        let bad = EmConfig { n_restarts: 0, ..cfg };
        assert!(fit_lgm(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0], &bad, 0).is_err());
    }

    #[test]
    fn fit_recovers_pure_laplacian() {
        let gen = LgmParams::from_parts(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let y = sample_lgm(100_000, &gen, 5).unwrap();
        let fit = fit_lgm(&y, &EmConfig::default(), 0).unwrap();
        assert!(fit.params.lambda1() >= 0.9, "{:?}", fit.params);
        assert!((fit.params.laplacian().sigma() - 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_is_deterministic_and_conserves_counts() {
        let gen = LgmParams::from_parts(0.6, 0.0, 1.0, 0.0, 6.0).unwrap();
        let y = sample_lgm(5_000, &gen, 8).unwrap();
        let a = fit_lgm(&y, &EmConfig::default(), 3).unwrap();
        let b = fit_lgm(&y, &EmConfig::default(), 3).unwrap();
        assert_eq!(a, b);
        assert!((a.n1 + a.n2 - y.len() as f64).abs() < 1e-6);
        assert_eq!(a.trace.log_likelihoods.len(), a.trace.iterations);
        let ll = a.params.log_likelihood(&y).unwrap();
        assert!((ll - a.final_loglik).abs() < 1e-8 * ll.abs());
        assert_eq!(a.data_hash, SampleHash::of(&y));
    }
}
