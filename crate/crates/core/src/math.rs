//! Scalar numerics shared by the rest of the crate.
//!
//! Every transcendental call goes through `libm` so that results are the
//! same whether or not the standard library is linked.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `log log n`, the iterated logarithm used by LIL-type normalisations.
pub fn log_log(n: usize) -> f64 {
    ln(ln(n as f64))
}

/// Standard normal distribution function Φ.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density φ.
pub fn normal_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / sqrt(2.0 * PI)
}

/// Φ⁻¹ by bisection on [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    bisect_increasing(normal_cdf, p, -40.0, 40.0)
}

/// Smallest `t` in `[lo, hi]` (up to float resolution) with `f(t) >= target`
/// for a nondecreasing `f`.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

/// Order-independent sum: values are sorted before compensated summation,
/// so any permutation of the input gives the same bits.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    compensated_sum(sorted)
}

pub fn stable_mean(values: &[f64]) -> f64 {
    stable_sum(values) / values.len() as f64
}

/// Mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = stable_mean(values);
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = stable_sum(&squares) / (n - 1.0);
    (mean, sqrt(var / n))
}

/// Variance with divisor `n - 1`.
pub fn sample_variance(values: &[f64]) -> f64 {
    let mean = stable_mean(values);
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    stable_sum(&squares) / (values.len() as f64 - 1.0)
}

/// Ordinary least-squares fit `y = a + b x`; returns `(b, se(b), a)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss = compensated_sum(x.iter().zip(y).map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        }));
        sqrt(rss / (n - 2.0) / sxx)
    } else {
        0.0
    };
    (slope, se, intercept)
}

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and a
/// continuous distribution function.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = panels.max(2) + panels % 2;
    let h = (b - a) / m as f64;
    let mut acc = CompensatedSum::new();
    acc.add(f(a));
    acc.add(f(b));
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(a + i as f64 * h));
    }
    acc.value() * h / 3.0
}

/// `k`-th smallest element (1-based) by total order.
pub fn order_statistic(values: &mut [f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= values.len());
    let (_, v, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

/// Smallest `k` in `1..=total` with `k / total >= p` as evaluated in `f64`.
///
/// This is the rank of the generalized inverse `inf{t : G(t) >= p}` of a
/// step function that jumps by `1/total`. Plain `ceil(total * p)` can land
/// one rank off when `total * p` rounds across an integer.
pub fn generalized_inverse_rank(total: u64, p: f64) -> u64 {
    let n = total as f64;
    let mut k = (ceil(n * p) as u64).clamp(1, total);
    while k > 1 && (k - 1) as f64 / n >= p {
        k -= 1;
    }
    while k < total && (k as f64) / n < p {
        k += 1;
    }
    k
}
