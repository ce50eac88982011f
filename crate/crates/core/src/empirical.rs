//! Empirical distribution functions, U-statistics and U-quantiles.
//!
//! Quantiles are generalized inverses `inf{t : G(t) >= p}` of step
//! functions, so every quantile returned here is an order statistic of the
//! sample (or of the pair statistics), never an interpolated value.
//!
//! For indicator kernels the pair statistics are never materialised on the
//! fast path. After sorting the sample, the number of pairs with
//! `s(Xᵢ, Xⱼ) <= t` is counted with two pointers in `O(n)`, and the
//! quantile is found by bisecting over the ordered bit patterns of `f64`.
//! Once the bracket shrinks to a single float it is a realised pair
//! statistic, which makes the result bit-identical to full enumeration.

use alloc::vec::Vec;

use crate::kernels::{KernelForm, KernelSpec, PairStatistic, ScalarKernel};
use crate::math;
use crate::{Error, Result};

/// Number of unordered pairs `n(n-1)/2`.
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Number of `y` in `sorted` with `s(x, y) <= t`.
pub fn count_partners_le(sorted: &[f64], stat: PairStatistic, x: f64, t: f64) -> usize {
    match stat {
        PairStatistic::PairMean => sorted.partition_point(|&y| stat.value(x, y) <= t),
        PairStatistic::PairAbsDiff => {
            let upper = sorted.partition_point(|&y| y < x || y - x <= t);
            let lower = sorted.partition_point(|&y| y < x && x - y > t);
            upper - lower
        }
    }
}

/// Number of pairs `i < j` with `s(xᵢ, xⱼ) <= t`, for `sorted` ascending.
pub fn count_pairs_le_sorted(sorted: &[f64], stat: PairStatistic, t: f64) -> u64 {
    let n = sorted.len();
    if n < 2 {
        return 0;
    }
    let mut count = 0u64;
    match stat {
        PairStatistic::PairMean => {
            let (mut i, mut j) = (0usize, n - 1);
            while i < j {
                if stat.value(sorted[i], sorted[j]) <= t {
                    count += (j - i) as u64;
                    i += 1;
                } else {
                    j -= 1;
                }
            }
        }
        PairStatistic::PairAbsDiff => {
            if t < 0.0 {
                return 0;
            }
            let mut i = 0usize;
            for j in 0..n {
                while sorted[j] - sorted[i] > t {
                    i += 1;
                }
                count += (j - i) as u64;
            }
        }
    }
    count
}

/// All pair statistics `s(xᵢ, xⱼ)`, `i < j`, lying in `[lo, hi]`, sorted.
pub fn pair_values_between(sorted: &[f64], stat: PairStatistic, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let rest = &sorted[i + 1..];
        // s(x, y) is nondecreasing in y for y >= x under both statistics
        let start = rest.partition_point(|&y| stat.value(x, y) < lo);
        let end = rest.partition_point(|&y| stat.value(x, y) <= hi);
        if start < end {
            out.extend(rest[start..end].iter().map(|&y| stat.value(x, y)));
        }
    }
    out.sort_unstable_by(f64::total_cmp);
    out
}

/// Largest `f64` strictly below `x`.
pub(crate) fn next_below(x: f64) -> f64 {
    x.next_down()
}

fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Empirical distribution function `Fₙ(t) = (1/n) Σ g(Xᵢ, t)`.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf<'a> {
    sample: &'a [f64],
    g: &'a ScalarKernel,
    sorted: Option<Vec<f64>>,
}

impl<'a> EmpiricalCdf<'a> {
    pub fn new(sample: &'a [f64], g: &'a ScalarKernel) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let sorted = g.is_indicator().then(|| sorted_copy(sample));
        Ok(Self { sample, g, sorted })
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    /// Sorted sample, present for the indicator kernel.
    pub fn sorted(&self) -> Option<&[f64]> {
        self.sorted.as_deref()
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.sorted {
            Some(s) => s.partition_point(|&x| x <= t) as f64 / s.len() as f64,
            None => {
                math::compensated_sum(self.sample.iter().map(|&x| self.g.eval(x, t)))
                    / self.sample.len() as f64
            }
        }
    }

    /// `inf{t : Fₙ(t) >= p}`, the `⌈np⌉`-th order statistic. Only defined
    /// here for the indicator kernel; see [`Self::quantile_bracketed`].
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let sorted = self.sorted.as_ref().ok_or(Error::NotInvertible)?;
        let k = math::generalized_inverse_rank(sorted.len() as u64, p) as usize;
        Ok(sorted[k - 1])
    }

    /// Generalized inverse for a monotone non-indicator `g`, by bisection
    /// inside `[lo, hi]`. Returns `hi` if `Fₙ(hi) < p`.
    pub fn quantile_bracketed(&self, p: f64, lo: f64, hi: f64) -> Result<f64> {
        check_probability(p)?;
        if !(lo < hi) {
            return Err(Error::param("bracket", "need lo < hi"));
        }
        if self.eval(lo) >= p {
            return Ok(lo);
        }
        Ok(math::bisect_increasing(|t| self.eval(t), p, lo, hi))
    }
}

/// Empirical U-distribution `Uₙ(t) = 2/(n(n-1)) Σ_{i<j} h(Xᵢ, Xⱼ, t)`.
#[derive(Debug, Clone)]
pub struct EmpiricalUDist<'a> {
    sample: &'a [f64],
    kernel: &'a KernelSpec,
    sorted: Option<Vec<f64>>,
}

impl<'a> EmpiricalUDist<'a> {
    pub fn new(sample: &'a [f64], kernel: &'a KernelSpec) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::SampleTooSmall {
                needed: 2,
                got: sample.len(),
            });
        }
        let sorted = kernel.pair_statistic().map(|_| sorted_copy(sample));
        Ok(Self {
            sample,
            kernel,
            sorted,
        })
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.kernel
    }

    pub fn sorted(&self) -> Option<&[f64]> {
        self.sorted.as_deref()
    }

    /// Exact `Uₙ(t)`. Indicator kernels use the `O(n)` counting path on the
    /// sorted sample; other kernels enumerate all pairs.
    pub fn eval(&self, t: f64) -> f64 {
        match (&self.sorted, self.kernel.pair_statistic()) {
            (Some(s), Some(stat)) => {
                count_pairs_le_sorted(s, stat, t) as f64 / pair_count(s.len()) as f64
            }
            _ => self.eval_naive(t),
        }
    }

    /// `O(n²)` enumeration of all pairs.
    pub fn eval_naive(&self, t: f64) -> f64 {
        let x = self.sample;
        let n = x.len();
        if let KernelForm::Indicator(stat) = self.kernel.form() {
            let mut hits = 0u64;
            for i in 0..n {
                for j in i + 1..n {
                    if stat.value(x[i], x[j]) <= t {
                        hits += 1;
                    }
                }
            }
            return hits as f64 / pair_count(n) as f64;
        }
        let mut acc = math::CompensatedSum::new();
        for i in 0..n {
            for j in i + 1..n {
                acc.add(self.kernel.eval(x[i], x[j], t));
            }
        }
        acc.value() / pair_count(n) as f64
    }

    /// `inf{t : Uₙ(t) >= p}` by full enumeration of the pair statistics and
    /// selection of the `⌈p·n(n-1)/2⌉`-th smallest.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let stat = self
            .kernel
            .pair_statistic()
            .ok_or_else(|| Error::NotIndicator(self.kernel.name().into()))?;
        let x = self.sample;
        let mut values = Vec::with_capacity(pair_count(x.len()) as usize);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                values.push(stat.value(x[i], x[j]));
            }
        }
        let k = math::generalized_inverse_rank(values.len() as u64, p) as usize;
        Ok(math::order_statistic(&mut values, k) + 0.0)
    }

    /// Same value as [`Self::quantile`] without materialising the pairs.
    pub fn quantile_fast(&self, p: f64) -> Result<f64> {
        let stat = self
            .kernel
            .pair_statistic()
            .ok_or_else(|| Error::NotIndicator(self.kernel.name().into()))?;
        match &self.sorted {
            Some(s) => select_sorted(s, stat, p),
            None => u_quantile_fast(self.sample, stat, p),
        }
    }
}

/// Fast U-quantile for the pair mean (Hodges–Lehmann at `p = 0.5`) or the
/// absolute pair difference (Qn at `p = 0.25`).
///
/// `O(n log n)` for the sort plus at most 64 two-pointer counting passes.
pub fn u_quantile_fast(sample: &[f64], stat: PairStatistic, p: f64) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall {
            needed: 2,
            got: sample.len(),
        });
    }
    select_sorted(&sorted_copy(sample), stat, p)
}

fn select_sorted(sorted: &[f64], stat: PairStatistic, p: f64) -> Result<f64> {
    check_probability(p)?;
    let n = sorted.len();
    let k = math::generalized_inverse_rank(pair_count(n), p);
    let (lo, hi) = match stat {
        PairStatistic::PairMean => (
            stat.value(sorted[0], sorted[1]),
            stat.value(sorted[n - 2], sorted[n - 1]),
        ),
        PairStatistic::PairAbsDiff => (0.0, stat.value(sorted[0], sorted[n - 1])),
    };
    let (mut lo, mut hi) = (order_key(lo), order_key(hi));
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if count_pairs_le_sorted(sorted, stat, from_order_key(mid)) >= k {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(from_order_key(lo) + 0.0)
}

/// Monotone map from `f64` (total order) to `u64`.
fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_order_key(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}

fn check_probability(p: f64) -> Result<()> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_hl_kernel, make_qn_kernel};
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn ecdf_examples() {
        let g = ScalarKernel::Indicator;
        let s = [1.0, 2.0, 3.0];
        let f = EmpiricalCdf::new(&s, &g).unwrap();
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(3.5), 1.0);
        let c = ScalarKernel::Constant(0.3);
        let fc = EmpiricalCdf::new(&s, &c).unwrap();
        for t in [-10.0, 0.0, 2.5, 99.0] {
            assert!((fc.eval(t) - 0.3).abs() < 1e-15);
        }
        assert!(matches!(
            EmpiricalCdf::new(&[], &g),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn ecdf_quantile_examples() {
        let g = ScalarKernel::Indicator;
        let s = [3.0, 1.0, 2.0];
        let f = EmpiricalCdf::new(&s, &g).unwrap();
        assert_eq!(f.quantile(0.5).unwrap(), 2.0);
        assert_eq!(f.quantile(0.34).unwrap(), 2.0);
        assert_eq!(f.quantile(1.0 / 3.0).unwrap(), 1.0);
        let c = ScalarKernel::Constant(0.5);
        let fc = EmpiricalCdf::new(&s, &c).unwrap();
        assert_eq!(fc.quantile(0.5), Err(Error::NotInvertible));
        assert!(f.quantile(1.5).is_err());
    }

    #[test]
    fn bracketed_quantile_for_smooth_g() {
        // g(x, t) = Φ(t - x): Fₙ is continuous and strictly increasing
        let g = ScalarKernel::custom("smooth", 1.0, |x, t| math::normal_cdf(t - x));
        let s = [0.0];
        let f = EmpiricalCdf::new(&s, &g).unwrap();
        let q = f.quantile_bracketed(0.975, -10.0, 10.0).unwrap();
        assert!((q - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn u_stat_examples() {
        let k = make_hl_kernel();
        let s = [0.0, 1.0, 2.0];
        let u = EmpiricalUDist::new(&s, &k).unwrap();
        assert!((u.eval(1.0) - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(u.eval(1e9), 1.0);
        assert_eq!(u.eval(-1e9), 0.0);
        let pair = [0.3, 1.1];
        let u2 = EmpiricalUDist::new(&pair, &k).unwrap();
        assert_eq!(u2.eval(0.7), k.eval(0.3, 1.1, 0.7));
        assert!(matches!(
            EmpiricalUDist::new(&[1.0], &k),
            Err(Error::SampleTooSmall { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn u_quantile_examples() {
        let hl = make_hl_kernel();
        let s = [1.0, 2.0, 3.0];
        let u = EmpiricalUDist::new(&s, &hl).unwrap();
        assert_eq!(u.quantile(0.5).unwrap(), 2.0);
        assert_eq!(u.quantile_fast(0.5).unwrap(), 2.0);
        let qn = make_qn_kernel();
        let s = [0.0, 1.0, 3.0];
        let u = EmpiricalUDist::new(&s, &qn).unwrap();
        assert_eq!(u.quantile(0.25).unwrap(), 1.0);
        assert_eq!(u.quantile_fast(0.25).unwrap(), 1.0);
        for p in [0.01, 0.5, 0.99] {
            assert_eq!(
                u_quantile_fast(&[4.0, -1.0], PairStatistic::PairMean, p).unwrap(),
                1.5
            );
            assert_eq!(
                u_quantile_fast(&[4.0, -1.0], PairStatistic::PairAbsDiff, p).unwrap(),
                5.0
            );
        }
    }

    #[test]
    fn non_indicator_kernels_have_no_u_quantile() {
        let k = KernelSpec::constant(1.0);
        let s = [1.0, 2.0, 3.0];
        let u = EmpiricalUDist::new(&s, &k).unwrap();
        assert!((u.eval(0.0) - 1.0).abs() < 1e-15);
        assert!(matches!(u.quantile(0.5), Err(Error::NotIndicator(_))));
        assert!(matches!(u.quantile_fast(0.5), Err(Error::NotIndicator(_))));
    }

    #[test]
    fn counting_agrees_with_enumeration_and_naive_eval() {
        let mut rng = rng_for(101, 0);
        for k in [make_hl_kernel(), make_qn_kernel()] {
            for _ in 0..200 {
                let n = rng.random_range(2..60);
                // coarse values produce many ties
                let s: Vec<f64> = (0..n)
                    .map(|_| rng.random_range(-5..5) as f64 * 0.5)
                    .collect();
                let u = EmpiricalUDist::new(&s, &k).unwrap();
                let t = rng.random_range(-6..6) as f64 * 0.25;
                assert_eq!(u.eval(t), u.eval_naive(t));
            }
        }
    }

    #[test]
    fn all_equal_sample() {
        let s = [2.5; 17];
        assert_eq!(
            u_quantile_fast(&s, PairStatistic::PairMean, 0.3).unwrap(),
            2.5
        );
        assert_eq!(
            u_quantile_fast(&s, PairStatistic::PairAbsDiff, 0.3).unwrap(),
            0.0
        );
    }

    #[test]
    fn order_key_is_monotone() {
        let xs = [
            f64::NEG_INFINITY,
            -3.0,
            -1e-300,
            -0.0,
            0.0,
            1e-300,
            2.0,
            f64::INFINITY,
        ];
        for w in xs.windows(2) {
            assert!(order_key(w[0]) < order_key(w[1]));
        }
        for x in xs {
            assert_eq!(from_order_key(order_key(x)).to_bits(), x.to_bits());
        }
    }
}
