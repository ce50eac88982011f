//! Bahadur remainders of sample quantiles and U-quantiles.
//!
//! For the generalized empirical distribution `Fₙ(t) = (1/n) Σ g(Xᵢ, t)`
//! with population counterpart `F`, `F(t_p) = p` and `f = F'`,
//!
//! ```text
//! Fₙ⁻¹(p) = t_p + (p - Fₙ(t_p)) / f(t_p) + Rₙ
//! ```
//!
//! and likewise `Uₙ⁻¹(p) = t_p + (p - Uₙ(t_p)) / u(t_p) + R′ₙ` for
//! U-quantiles. Under strong mixing or for approximating functionals the
//! remainder decays like `n^-(5/8 + γ/8)` up to logarithmic factors; the
//! rate study in this module fits that exponent on a log-log scale.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::empirical::{self, EmpiricalCdf, EmpiricalUDist};
use crate::exec::Executor;
use crate::kernels::{KernelSpec, ScalarKernel};
use crate::marginal::Marginal;
use crate::math;
use crate::processes::{ProcessModel, SamplePath};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthSource {
    Analytic,
    DerivedNumeric,
}

/// True quantile `t_p` and the density of `F` (or `U`) there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileTruth {
    pub p: f64,
    pub t_p: f64,
    pub density_at_tp: f64,
    pub source: TruthSource,
}

impl QuantileTruth {
    pub fn new(p: f64, t_p: f64, density_at_tp: f64, source: TruthSource) -> Result<Self> {
        check_p(p)?;
        if !(density_at_tp > 0.0) || !density_at_tp.is_finite() {
            return Err(Error::DegenerateDensity(density_at_tp));
        }
        Ok(Self {
            p,
            t_p,
            density_at_tp,
            source,
        })
    }

    /// Quantile of the marginal itself (`g = 1{x <= t}`).
    pub fn for_marginal(p: f64, marginal: &dyn Marginal) -> Result<Self> {
        check_p(p)?;
        let t_p = marginal.quantile(p);
        Self::new(p, t_p, marginal.pdf(t_p), TruthSource::Analytic)
    }

    /// p-quantile of the U-distribution attached to `kernel`, found by
    /// bisection on `U(t) = p`.
    pub fn for_kernel(p: f64, kernel: &KernelSpec) -> Result<Self> {
        check_p(p)?;
        let u = kernel.analytic().ok_or_else(|| {
            Error::NoTruth(alloc::format!(
                "kernel `{}` without a marginal",
                kernel.name()
            ))
        })?;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while u.cdf(lo) >= p && lo > -1e12 {
            lo *= 2.0;
        }
        while u.cdf(hi) < p && hi < 1e12 {
            hi *= 2.0;
        }
        let t_p = math::bisect_increasing(|t| u.cdf(t), p, lo, hi);
        if (u.cdf(t_p) - p).abs() > 1e-10 {
            return Err(Error::NoTruth(alloc::format!(
                "U({t_p}) = {} does not reach p = {p}",
                u.cdf(t_p)
            )));
        }
        let source = if u.is_closed_form() {
            TruthSource::Analytic
        } else {
            TruthSource::DerivedNumeric
        };
        Self::new(p, t_p, u.density(t_p), source)
    }

    /// Asymptotic variance `p(1-p)/f(t_p)²` of the sample quantile for iid
    /// data.
    pub fn iid_quantile_sigma2(&self) -> f64 {
        self.p * (1.0 - self.p) / (self.density_at_tp * self.density_at_tp)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "p",
            value: p,
            expected: "0 < p < 1",
        })
    }
}

/// Which generalized quantile is being studied.
#[derive(Debug, Clone)]
pub enum QuantileStatistic {
    /// `Fₙ⁻¹(p)` for a one-argument kernel `g`.
    Quantile(ScalarKernel),
    /// `Uₙ⁻¹(p)` for a two-argument indicator kernel.
    UQuantile(KernelSpec),
}

impl QuantileStatistic {
    pub fn name(&self) -> &str {
        match self {
            QuantileStatistic::Quantile(g) => g.name(),
            QuantileStatistic::UQuantile(k) => k.name(),
        }
    }

    pub fn is_u_quantile(&self) -> bool {
        matches!(self, QuantileStatistic::UQuantile(_))
    }

    /// `(Fₙ⁻¹(p), Fₙ(t))` or `(Uₙ⁻¹(p), Uₙ(t))`.
    pub fn estimate_and_level(&self, sample: &[f64], p: f64, t: f64) -> Result<(f64, f64)> {
        match self {
            QuantileStatistic::Quantile(g) => {
                let f = EmpiricalCdf::new(sample, g)?;
                Ok((f.quantile(p)?, f.eval(t)))
            }
            QuantileStatistic::UQuantile(k) => {
                let u = EmpiricalUDist::new(sample, k)?;
                Ok((u.quantile_fast(p)?, u.eval(t)))
            }
        }
    }

    pub fn estimate(&self, sample: &[f64], p: f64) -> Result<f64> {
        match self {
            QuantileStatistic::Quantile(g) => EmpiricalCdf::new(sample, g)?.quantile(p),
            QuantileStatistic::UQuantile(k) => EmpiricalUDist::new(sample, k)?.quantile_fast(p),
        }
    }
}

/// One realisation of the Bahadur remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderSample {
    pub n: usize,
    pub r: f64,
    pub estimate: f64,
    /// `(p - Fₙ(t_p)) / f(t_p)`, or the U-statistic analogue.
    pub linear_term: f64,
    pub seed: u64,
}

fn remainder_from(
    sample: &[f64],
    statistic: &QuantileStatistic,
    truth: &QuantileTruth,
    seed: u64,
) -> Result<RemainderSample> {
    if !(truth.density_at_tp > 0.0) {
        return Err(Error::DegenerateDensity(truth.density_at_tp));
    }
    let (estimate, level) = statistic.estimate_and_level(sample, truth.p, truth.t_p)?;
    let linear_term = (truth.p - level) / truth.density_at_tp;
    Ok(RemainderSample {
        n: sample.len(),
        r: estimate - truth.t_p - linear_term,
        estimate,
        linear_term,
        seed,
    })
}

/// `Rₙ = Fₙ⁻¹(p) - t_p - (p - Fₙ(t_p)) / f(t_p)`.
pub fn remainder_quantile(
    path: &SamplePath,
    g: &ScalarKernel,
    truth: &QuantileTruth,
) -> Result<RemainderSample> {
    if path.is_empty() {
        return Err(Error::EmptySample);
    }
    remainder_from(
        path,
        &QuantileStatistic::Quantile(g.clone()),
        truth,
        path.seed,
    )
}

/// `R′ₙ = Uₙ⁻¹(p) - t_p - (p - Uₙ(t_p)) / u(t_p)`.
pub fn remainder_uquantile(
    path: &SamplePath,
    kernel: &KernelSpec,
    truth: &QuantileTruth,
) -> Result<RemainderSample> {
    if kernel.pair_statistic().is_none() {
        return Err(Error::NotIndicator(kernel.name().into()));
    }
    remainder_from(
        path,
        &QuantileStatistic::UQuantile(kernel.clone()),
        truth,
        path.seed,
    )
}

/// Local oscillation
/// `sup_{|t - t_p| <= C √(log log n / n)} |Gₙ(t) - G(t) - Gₙ(t_p) + G(t_p)|`
/// of the empirical (U-)distribution `Gₙ` around `t_p`.
///
/// The supremum is taken over a grid of step `(log log n / n)^{3/4}` and,
/// for indicator kernels, over every jump of `Gₙ` inside the window (both
/// the jump value and its left limit), which makes it exact for those.
pub fn oscillation_sup(
    sample: &[f64],
    statistic: &QuantileStatistic,
    population: impl Fn(f64) -> f64,
    truth: &QuantileTruth,
    c: f64,
) -> Result<f64> {
    let n = sample.len();
    if n < 16 {
        return Err(Error::WindowTooSmall(n));
    }
    let ll = math::log_log(n);
    if !(ll > 0.0) {
        return Err(Error::WindowTooSmall(n));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::param("C", "window constant must be finite and >= 0"));
    }
    let half = c * math::sqrt(ll / n as f64);
    let step = math::powf(ll / n as f64, 0.75);
    let t_p = truth.t_p;
    let (lo, hi) = (t_p - half, t_p + half);

    // (empirical level at t, population at t) pairs to compare
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    let centre: f64;
    match statistic {
        QuantileStatistic::Quantile(g) => {
            let f = EmpiricalCdf::new(sample, g)?;
            centre = f.eval(t_p) - population(t_p);
            let steps = math::floor(half / step) as i64;
            for k in -steps..=steps {
                let t = t_p + k as f64 * step;
                candidates.push((f.eval(t), population(t)));
            }
            candidates.push((f.eval(lo), population(lo)));
            candidates.push((f.eval(hi), population(hi)));
            if let Some(sorted) = f.sorted() {
                let m = sorted.len() as f64;
                let start = sorted.partition_point(|&x| x < lo);
                let end = sorted.partition_point(|&x| x <= hi);
                for i in start..end {
                    let x = sorted[i];
                    let below = sorted.partition_point(|&v| v < x) as f64 / m;
                    let upto = sorted.partition_point(|&v| v <= x) as f64 / m;
                    let fx = population(x);
                    candidates.push((upto, fx));
                    if x > lo {
                        candidates.push((below, fx));
                    }
                }
            }
        }
        QuantileStatistic::UQuantile(k) => {
            let u = EmpiricalUDist::new(sample, k)?;
            centre = u.eval(t_p) - population(t_p);
            let steps = math::floor(half / step) as i64;
            for j in -steps..=steps {
                let t = t_p + j as f64 * step;
                candidates.push((u.eval(t), population(t)));
            }
            candidates.push((u.eval(lo), population(lo)));
            candidates.push((u.eval(hi), population(hi)));
            if let (Some(sorted), Some(stat)) = (u.sorted(), k.pair_statistic()) {
                let total = empirical::pair_count(n) as f64;
                let base =
                    empirical::count_pairs_le_sorted(sorted, stat, empirical::next_below(lo));
                let window = empirical::pair_values_between(sorted, stat, lo, hi);
                let mut i = 0;
                while i < window.len() {
                    let v = window[i];
                    let mut j = i;
                    while j < window.len() && window[j] == v {
                        j += 1;
                    }
                    let fv = population(v);
                    candidates.push(((base + j as u64) as f64 / total, fv));
                    if v > lo {
                        candidates.push(((base + i as u64) as f64 / total, fv));
                    }
                    i = j;
                }
            }
        }
    }
    Ok(candidates
        .into_iter()
        .map(|(emp, pop)| math::abs(emp - pop - centre))
        .fold(0.0, f64::max))
}

/// Rate exponent `5/8 + γ/8` of the remainder.
pub fn theoretical_exponent(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::OutOfRange {
            what: "gamma",
            value: gamma,
            expected: "0 < gamma <= 1",
        });
    }
    Ok(5.0 / 8.0 + gamma / 8.0)
}

/// Kiefer's constant `2^{1/2} 3^{-3/4} (p(1-p))^{1/4}` in the iid law of
/// the iterated logarithm for `Rₙ`.
pub fn kiefer_constant(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(core::f64::consts::SQRT_2 * math::powf(3.0, -0.75) * math::powf(p * (1.0 - p), 0.25))
}

/// Numerical check of `|U(t) - p - u(t_p)(t - t_p)| <= 0.5 |t - t_p|^{3/2}`
/// on a shrinking grid `|t - t_p| = 2^-k`, `k = 4..=30`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCheck {
    pub passed: bool,
    /// Largest `|U(t) - p - u(t_p)(t - t_p)| / |t - t_p|^{3/2}` seen.
    pub worst_ratio: f64,
}

pub fn check_smoothness(population: impl Fn(f64) -> f64, truth: &QuantileTruth) -> SmoothnessCheck {
    let mut worst: f64 = 0.0;
    for k in 4..=30 {
        let delta = math::powf(2.0, -(k as f64));
        for t in [truth.t_p - delta, truth.t_p + delta] {
            let dev = population(t) - truth.p - truth.density_at_tp * (t - truth.t_p);
            worst = worst.max(math::abs(dev) / math::powf(delta, 1.5));
        }
    }
    SmoothnessCheck {
        passed: worst <= 0.5,
        worst_ratio: worst,
    }
}

#[derive(Debug, Clone)]
pub struct RateStudyConfig {
    pub process: ProcessModel,
    pub statistic: QuantileStatistic,
    pub truth: QuantileTruth,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerNSummary {
    pub n: usize,
    /// Root mean square of the remainder across replicates.
    pub rms_r: f64,
    pub mean_r: f64,
    /// 90% quantile of `|r|`.
    pub q90_abs_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    pub process: String,
    pub statistic: String,
    pub per_n: Vec<PerNSummary>,
    pub replicates: usize,
    /// OLS slope of `log₂ rms` on `log₂ n`; compare with `-theoretical_exponent`.
    pub fitted_slope: f64,
    pub slope_se: f64,
    pub theoretical_exponent: f64,
    pub gamma: f64,
    /// `remainders[i][r]`: replicate `r` at `n_grid[i]`.
    #[serde(skip)]
    pub remainders: Vec<Vec<f64>>,
}

impl RateStudyResult {
    pub fn n_grid(&self) -> Vec<usize> {
        self.per_n.iter().map(|s| s.n).collect()
    }

    pub fn rms_r(&self) -> Vec<f64> {
        self.per_n.iter().map(|s| s.rms_r).collect()
    }
}

pub const MIN_RATE_REPLICATES: usize = 500;

fn validate_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 4 {
        return Err(Error::InsufficientGrid("need at least 4 sample sizes"));
    }
    if n_grid.iter().any(|n| !n.is_power_of_two()) {
        return Err(Error::InsufficientGrid(
            "sample sizes must be powers of two",
        ));
    }
    if n_grid[0] < 128 {
        return Err(Error::InsufficientGrid(
            "smallest sample size must be >= 128",
        ));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InsufficientGrid(
            "sample sizes must be strictly increasing",
        ));
    }
    Ok(())
}

/// Monte Carlo rate study of the remainder.
///
/// Each replicate draws one path of the largest length from a seed derived
/// from `(master_seed, replicate)` and evaluates the remainder on its
/// prefixes, so all sample sizes share common randomness. Results do not
/// depend on the executor.
pub fn rate_study<E: Executor>(config: &RateStudyConfig, exec: &E) -> Result<RateStudyResult> {
    validate_grid(&config.n_grid)?;
    if config.replicates < MIN_RATE_REPLICATES {
        return Err(Error::param(
            "replicates",
            alloc::format!(
                "need at least {MIN_RATE_REPLICATES}, got {}",
                config.replicates
            ),
        ));
    }
    let dependence = config.process.dependence();
    let gamma = if config.statistic.is_u_quantile() {
        dependence.gamma_for_u_quantile()?
    } else {
        dependence.gamma()?
    };
    let theoretical = theoretical_exponent(gamma)?;
    let n_max = *config.n_grid.last().expect("validated grid");

    let per_replicate: Vec<Result<Vec<f64>>> = exec.map_indexed(config.replicates, |rep| {
        let seed = derive_seed(config.master_seed, rep as u64);
        let path = config.process.generate(n_max, seed);
        config
            .n_grid
            .iter()
            .map(|&n| {
                remainder_from(&path[..n], &config.statistic, &config.truth, seed).map(|s| s.r)
            })
            .collect()
    });
    let per_replicate: Vec<Vec<f64>> = per_replicate.into_iter().collect::<Result<_>>()?;

    let remainders: Vec<Vec<f64>> = (0..config.n_grid.len())
        .map(|i| per_replicate.iter().map(|row| row[i]).collect())
        .collect();
    let per_n: Vec<PerNSummary> = config
        .n_grid
        .iter()
        .zip(&remainders)
        .map(|(&n, rs)| summarise(n, rs))
        .collect();

    let x: Vec<f64> = per_n.iter().map(|s| math::log2(s.n as f64)).collect();
    let y: Vec<f64> = per_n.iter().map(|s| math::log2(s.rms_r)).collect();
    let (fitted_slope, slope_se, _) = math::ols_slope(&x, &y);

    Ok(RateStudyResult {
        process: config.process.name().into(),
        statistic: config.statistic.name().into(),
        per_n,
        replicates: config.replicates,
        fitted_slope,
        slope_se,
        theoretical_exponent: theoretical,
        gamma,
        remainders,
    })
}

fn summarise(n: usize, rs: &[f64]) -> PerNSummary {
    let squares: Vec<f64> = rs.iter().map(|r| r * r).collect();
    let mut abs: Vec<f64> = rs.iter().map(|r| math::abs(*r)).collect();
    let k = math::generalized_inverse_rank(abs.len() as u64, 0.9) as usize;
    PerNSummary {
        n,
        rms_r: math::sqrt(math::stable_mean(&squares)),
        mean_r: math::stable_mean(rs),
        q90_abs_r: math::order_statistic(&mut abs, k),
    }
}
