//! Long-run variances, CLT intervals and LIL diagnostics.
//!
//! The asymptotic variance of `√n (Fₙ⁻¹(p) - t_p)` is the long-run variance
//! of `g(Xᵢ, t_p)` divided by `f(t_p)²`. For U-quantiles the linear part of
//! `Uₙ(t) - U(t)` is `(2/n) Σ h₁(Xᵢ, t)`, which gives
//! `4 · LRV(h₁(Xᵢ, t_p)) / u(t_p)²`. `h₁` is replaced by pseudo-values
//! centred at `Uₙ(t)` so no population quantity other than the density is
//! needed.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bahadur::{QuantileStatistic, QuantileTruth};
use crate::empirical::{count_partners_le, pair_count};
use crate::exec::Executor;
use crate::kernels::{KernelSpec, PairStatistic};
use crate::math;
use crate::processes::ProcessModel;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// `ĥ₁(Xᵢ, t) = (1/(n-1)) Σ_{j≠i} h(Xᵢ, Xⱼ, t) - Uₙ(t)`.
///
/// Indicator kernels are handled in `O(n log n)` by counting partners in
/// the sorted sample; other kernels cost `O(n²)` kernel evaluations.
pub fn h1_pseudo_values(sample: &[f64], kernel: &KernelSpec, t: f64) -> Result<Vec<f64>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let row_sums: Vec<f64> = match kernel.pair_statistic() {
        Some(stat) => {
            let mut sorted = sample.to_vec();
            sorted.sort_unstable_by(f64::total_cmp);
            let self_value = |x: f64| match stat {
                PairStatistic::PairMean => x,
                PairStatistic::PairAbsDiff => 0.0,
            };
            sample
                .iter()
                .map(|&x| {
                    let all = count_partners_le(&sorted, stat, x, t);
                    let own = usize::from(self_value(x) <= t);
                    (all - own) as f64
                })
                .collect()
        }
        None => sample
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                math::compensated_sum(
                    sample
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, &y)| kernel.eval(x, y, t)),
                )
            })
            .collect(),
    };
    let scale = (n - 1) as f64;
    let conditional: Vec<f64> = row_sums.iter().map(|s| s / scale).collect();
    // each pair is counted twice in the row sums
    let u_n = match kernel.pair_statistic() {
        Some(_) => row_sums.iter().sum::<f64>() / 2.0 / pair_count(n) as f64,
        None => math::stable_mean(&conditional),
    };
    let mut values: Vec<f64> = conditional.iter().map(|c| c - u_n).collect();
    // remove the rounding residue so the mean is zero to machine precision
    let residue = math::stable_mean(&values);
    values.iter_mut().for_each(|v| *v -= residue);
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrvMethod {
    Bartlett,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub value: f64,
    pub bandwidth: usize,
    pub method: LrvMethod,
    pub series_length: usize,
}

pub const MIN_LRV_LENGTH: usize = 8;

/// Default Bartlett bandwidth `⌈n^{1/3}⌉`.
pub fn default_bandwidth(n: usize) -> usize {
    math::ceil(math::powf(n as f64, 1.0 / 3.0)) as usize
}

/// Bartlett estimate `γ̂₀ + 2 Σ_{k=1}^{b} (1 - k/(b+1)) γ̂ₖ` with
/// autocovariances divided by `n`.
pub fn long_run_variance(series: &[f64], bandwidth: Option<usize>) -> Result<LrvEstimate> {
    let n = series.len();
    if n < MIN_LRV_LENGTH {
        return Err(Error::SeriesTooShort {
            needed: MIN_LRV_LENGTH,
            got: n,
        });
    }
    let b = bandwidth.unwrap_or_else(|| default_bandwidth(n)).min(n - 1);
    let mean = math::stable_mean(series);
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |k: usize| {
        math::compensated_sum(centred[k..].iter().zip(&centred).map(|(a, b)| a * b)) / n as f64
    };
    let mut total = math::CompensatedSum::new();
    total.add(autocov(0));
    for k in 1..=b {
        let w = 1.0 - k as f64 / (b + 1) as f64;
        total.add(2.0 * w * autocov(k));
    }
    Ok(LrvEstimate {
        value: total.value().max(0.0),
        bandwidth: b,
        method: LrvMethod::Bartlett,
        series_length: n,
    })
}

pub const MIN_SIGMA2_LENGTH: usize = 32;

/// Plug-in asymptotic variance of `√n (estimate - t_p)`.
pub fn quantile_sigma2(
    sample: &[f64],
    statistic: &QuantileStatistic,
    truth: &QuantileTruth,
    bandwidth: Option<usize>,
) -> Result<f64> {
    let n = sample.len();
    if n < MIN_SIGMA2_LENGTH {
        return Err(Error::SampleTooSmall {
            needed: MIN_SIGMA2_LENGTH,
            got: n,
        });
    }
    let f = truth.density_at_tp;
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::DegenerateDensity(f));
    }
    match statistic {
        QuantileStatistic::Quantile(g) => {
            let series: Vec<f64> = sample.iter().map(|&x| g.eval(x, truth.t_p)).collect();
            Ok(long_run_variance(&series, bandwidth)?.value / (f * f))
        }
        QuantileStatistic::UQuantile(k) => {
            let series = h1_pseudo_values(sample, k, truth.t_p)?;
            Ok(4.0 * long_run_variance(&series, bandwidth)?.value / (f * f))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub nominal: f64,
    pub empirical: f64,
    pub replicates: usize,
    pub n: usize,
    /// Binomial standard error `√(p̂(1-p̂)/replicates)`.
    pub std_error: f64,
}

pub const MIN_COVERAGE_REPLICATES: usize = 500;

/// Fraction of replicates whose interval `estimate ± z σ̂/√n` covers `t_p`,
/// with `σ̂²` from [`quantile_sigma2`] at the given Bartlett bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn clt_coverage<E: Executor>(
    process: &ProcessModel,
    statistic: &QuantileStatistic,
    truth: &QuantileTruth,
    n: usize,
    replicates: usize,
    level: f64,
    bandwidth: Option<usize>,
    master_seed: u64,
    exec: &E,
) -> Result<CoverageResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::OutOfRange {
            what: "level",
            value: level,
            expected: "0 < level < 1",
        });
    }
    if replicates < MIN_COVERAGE_REPLICATES {
        return Err(Error::param(
            "replicates",
            alloc::format!("need at least {MIN_COVERAGE_REPLICATES}, got {replicates}"),
        ));
    }
    if !(truth.density_at_tp > 0.0) {
        return Err(Error::DegenerateDensity(truth.density_at_tp));
    }
    let z = math::normal_quantile(0.5 + level / 2.0);
    let hits: Vec<Result<bool>> = exec.map_indexed(replicates, |rep| {
        let path = process.generate(n, derive_seed(master_seed, rep as u64));
        let estimate = statistic.estimate(&path, truth.p)?;
        let sigma2 = quantile_sigma2(&path, statistic, truth, bandwidth)?;
        let half = z * math::sqrt(sigma2 / n as f64);
        Ok(math::abs(estimate - truth.t_p) <= half)
    });
    let mut covered = 0usize;
    for h in hits {
        covered += usize::from(h?);
    }
    let empirical = covered as f64 / replicates as f64;
    Ok(CoverageResult {
        nominal: level,
        empirical,
        replicates,
        n,
        std_error: math::sqrt(empirical * (1.0 - empirical) / replicates as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilCheckpoint {
    pub n: usize,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilDiagnostic {
    /// Largest normalised deviation over all checkpoints.
    pub max_statistic: f64,
    pub per_checkpoint: Vec<LilCheckpoint>,
    pub sigma2: f64,
    pub seed: u64,
    /// `max_statistic <= LIL_BOUND`.
    pub consistent: bool,
}

pub const LIL_BOUND: f64 = 3.0;
pub const MIN_LIL_LENGTH: usize = 1024;
pub const MIN_LIL_CHECKPOINT: usize = 16;

/// Powers of two from 16 up to `n_max`.
pub fn power_of_two_checkpoints(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = MIN_LIL_CHECKPOINT;
    while n <= n_max {
        out.push(n);
        n *= 2;
    }
    out
}

/// `max_n √(n / log log n) |estimateₙ - t_p| / √(2σ²)` over the checkpoints of
/// a single path of length `n_max`.
///
/// Without an explicit `sigma2` the plug-in [`quantile_sigma2`] of the full
/// path is used.
pub fn lil_diagnostic(
    process: &ProcessModel,
    statistic: &QuantileStatistic,
    truth: &QuantileTruth,
    n_max: usize,
    checkpoints: &[usize],
    seed: u64,
    sigma2: Option<f64>,
) -> Result<LilDiagnostic> {
    if n_max < MIN_LIL_LENGTH {
        return Err(Error::SampleTooSmall {
            needed: MIN_LIL_LENGTH,
            got: n_max,
        });
    }
    if checkpoints.is_empty() {
        return Err(Error::param("checkpoints", "need at least one checkpoint"));
    }
    if let Some(&bad) = checkpoints
        .iter()
        .find(|&&c| !(MIN_LIL_CHECKPOINT..=n_max).contains(&c))
    {
        return Err(Error::OutOfRange {
            what: "checkpoint",
            value: bad as f64,
            expected: "16 <= checkpoint <= n_max",
        });
    }
    let path = process.generate(n_max, seed);
    let sigma2 = match sigma2 {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::param(
                "sigma2",
                alloc::format!("must be positive, got {s}"),
            ))
        }
        None => quantile_sigma2(&path, statistic, truth, None)?,
    };
    let scale = math::sqrt(2.0 * sigma2);
    let mut per_checkpoint = Vec::with_capacity(checkpoints.len());
    for &n in checkpoints {
        let estimate = statistic.estimate(&path[..n], truth.p)?;
        let norm = math::sqrt(n as f64 / math::log_log(n));
        per_checkpoint.push(LilCheckpoint {
            n,
            statistic: norm * math::abs(estimate - truth.t_p) / scale,
        });
    }
    let max_statistic = per_checkpoint
        .iter()
        .map(|c| c.statistic)
        .fold(0.0, f64::max);
    Ok(LilDiagnostic {
        max_statistic,
        per_checkpoint,
        sigma2,
        seed,
        consistent: max_statistic <= LIL_BOUND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bahadur::TruthSource;
    use crate::exec::Sequential;
    use crate::kernels::{make_hl_kernel, make_qn_kernel, ScalarKernel};
    use crate::marginal::Normal;
    use core::f64::consts::PI;

    fn naive_pseudo(sample: &[f64], kernel: &KernelSpec, t: f64) -> Vec<f64> {
        let n = sample.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += kernel.eval(sample[i], sample[j], t);
            }
        }
        let u = total / pair_count(n) as f64;
        (0..n)
            .map(|i| {
                let s: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| kernel.eval(sample[i], sample[j], t))
                    .sum();
                s / (n - 1) as f64 - u
            })
            .collect()
    }

    #[test]
    fn pseudo_values_match_direct_sum() {
        let path = ProcessModel::iid_normal().generate(101, 4);
        for kernel in [make_hl_kernel(), make_qn_kernel()] {
            for t in [-0.7, 0.0, 0.3, 1.1] {
                let fast = h1_pseudo_values(&path, &kernel, t).unwrap();
                let slow = naive_pseudo(&path, &kernel, t);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12);
                }
                assert!(math::stable_mean(&fast).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_values_with_ties() {
        let sample = [0.0, 0.0, 1.0, 1.0, 2.0, -1.0, 0.0];
        for kernel in [make_hl_kernel(), make_qn_kernel()] {
            for t in [-0.5, 0.0, 0.5, 1.0] {
                let fast = h1_pseudo_values(&sample, &kernel, t).unwrap();
                let slow = naive_pseudo(&sample, &kernel, t);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12, "{} t={t}", kernel.name());
                }
            }
        }
    }

    #[test]
    fn pseudo_values_edge_cases() {
        assert_eq!(
            h1_pseudo_values(&[0.3, 1.2], &make_hl_kernel(), 0.5).unwrap(),
            [0.0, 0.0]
        );
        let path = ProcessModel::iid_normal().generate(50, 1);
        let zeros = h1_pseudo_values(&path, &KernelSpec::constant(0.4), 0.0).unwrap();
        assert!(zeros.iter().all(|v| v.abs() < 1e-15));
        assert!(matches!(
            h1_pseudo_values(&[1.0], &make_hl_kernel(), 0.0),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn hl_pseudo_value_variance() {
        // h₁(x, 0) = Φ(−x) − 1/2 has variance 1/12
        let path = ProcessModel::iid_normal().generate(10_000, 11);
        let v = h1_pseudo_values(&path, &make_hl_kernel(), 0.0).unwrap();
        assert!((math::sample_variance(&v) - 1.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn lrv_of_iid_and_ar1() {
        let iid = ProcessModel::iid_normal().generate(100_000, 3);
        let est = long_run_variance(&iid, None).unwrap();
        assert!((est.value - 1.0).abs() < 0.05, "{}", est.value);
        assert_eq!(est.bandwidth, 47);

        let ar = ProcessModel::ar1_gaussian(0.5)
            .unwrap()
            .generate(100_000, 3);
        // unit-variance marginal scaled: LRV = (1 + φ)/(1 − φ) · var
        let var = math::sample_variance(&ar);
        let est = long_run_variance(&ar, None).unwrap();
        assert!((est.value / var - 3.0).abs() < 0.3, "{}", est.value / var);
    }

    #[test]
    fn lrv_edge_cases() {
        let constant = [2.5; 64];
        assert_eq!(long_run_variance(&constant, None).unwrap().value, 0.0);
        assert_eq!(
            long_run_variance(&[1.0; 7], None),
            Err(Error::SeriesTooShort { needed: 8, got: 7 })
        );
        let series = ProcessModel::iid_normal().generate(200, 8);
        let zero = long_run_variance(&series, Some(0)).unwrap();
        let n = series.len() as f64;
        assert!((zero.value - math::sample_variance(&series) * (n - 1.0) / n).abs() < 1e-14);
        let huge = long_run_variance(&series, Some(10_000)).unwrap();
        assert!(huge.bandwidth < huge.series_length);
    }

    #[test]
    fn sigma2_of_median_and_hl() {
        let path = ProcessModel::iid_normal().generate(10_000, 21);
        let median = QuantileTruth::for_marginal(0.5, &Normal::STANDARD).unwrap();
        let s = quantile_sigma2(
            &path,
            &QuantileStatistic::Quantile(ScalarKernel::Indicator),
            &median,
            None,
        )
        .unwrap();
        assert!((s / (PI / 2.0) - 1.0).abs() < 0.1, "{s}");

        let hl = make_hl_kernel();
        let truth = QuantileTruth::new(0.5, 0.0, 1.0 / PI.sqrt(), TruthSource::Analytic).unwrap();
        let s = quantile_sigma2(
            &path,
            &QuantileStatistic::UQuantile(hl.clone()),
            &truth,
            None,
        )
        .unwrap();
        assert!((s / (PI / 3.0) - 1.0).abs() < 0.1, "{s}");

        let pseudo = h1_pseudo_values(&path, &hl, 0.0).unwrap();
        let n = pseudo.len() as f64;
        let plain = 4.0 * math::sample_variance(&pseudo) * (n - 1.0) / n * PI;
        let s0 =
            quantile_sigma2(&path, &QuantileStatistic::UQuantile(hl), &truth, Some(0)).unwrap();
        assert!((s0 - plain).abs() < 1e-12);
    }

    #[test]
    fn coverage_guards() {
        let truth = QuantileTruth::for_marginal(0.5, &Normal::STANDARD).unwrap();
        let stat = QuantileStatistic::Quantile(ScalarKernel::Indicator);
        let p = ProcessModel::iid_normal();
        assert!(clt_coverage(&p, &stat, &truth, 100, 500, 1.0, None, 1, &Sequential).is_err());
        assert!(clt_coverage(&p, &stat, &truth, 100, 499, 0.9, None, 1, &Sequential).is_err());
        let flat = QuantileTruth {
            density_at_tp: 0.0,
            ..truth
        };
        assert_eq!(
            clt_coverage(
                &ProcessModel::constant(1.0),
                &stat,
                &flat,
                100,
                500,
                0.9,
                None,
                1,
                &Sequential
            ),
            Err(Error::DegenerateDensity(0.0))
        );
    }

    #[test]
    fn coverage_at_half_level() {
        let truth = QuantileTruth::for_marginal(0.5, &Normal::STANDARD).unwrap();
        let stat = QuantileStatistic::Quantile(ScalarKernel::Indicator);
        let res = clt_coverage(
            &ProcessModel::iid_normal(),
            &stat,
            &truth,
            400,
            1000,
            0.5,
            None,
            3,
            &Sequential,
        )
        .unwrap();
        assert!(
            res.empirical >= 0.45 && res.empirical <= 0.55,
            "{}",
            res.empirical
        );
        assert!(res.std_error > 0.0);
    }

    #[test]
    fn lil_scaling_and_guards() {
        let truth = QuantileTruth::for_marginal(0.5, &Normal::STANDARD).unwrap();
        let stat = QuantileStatistic::Quantile(ScalarKernel::Indicator);
        let p = ProcessModel::iid_normal();
        let cps = power_of_two_checkpoints(4096);
        assert_eq!(cps.first(), Some(&16));
        assert_eq!(cps.last(), Some(&4096));
        let a = lil_diagnostic(&p, &stat, &truth, 4096, &cps, 5, Some(PI / 2.0)).unwrap();
        let b = lil_diagnostic(&p, &stat, &truth, 4096, &cps, 5, Some(PI)).unwrap();
        assert!((a.max_statistic / b.max_statistic - 2f64.sqrt()).abs() < 1e-12);
        let single = lil_diagnostic(&p, &stat, &truth, 1024, &[16], 5, None).unwrap();
        assert!(single.max_statistic.is_finite());
        assert!(lil_diagnostic(&p, &stat, &truth, 1000, &[16], 5, None).is_err());
        assert!(lil_diagnostic(&p, &stat, &truth, 1024, &[8], 5, None).is_err());
        assert!(lil_diagnostic(&p, &stat, &truth, 1024, &[2048], 5, None).is_err());
    }
}
