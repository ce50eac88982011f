//! Kernels for U-quantiles and their Hoeffding decomposition.
//!
//! A kernel is a bounded function `h(x, y, t)`, symmetric in `(x, y)` and
//! nondecreasing in `t`. The built-in kernels are indicators of a pair
//! statistic, `h = 1{s(x, y) <= t}`:
//!
//! - Hodges–Lehmann: `s(x, y) = (x + y) / 2`
//! - Qn scale: `s(x, y) = |x - y|`
//!
//! Given the common marginal law of the observations, `U(t) = E h(X, Y, t)`
//! for independent `X, Y`, and the Hoeffding components are
//!
//! ```text
//! h₁(x, t)    = E h(x, Y, t) - U(t)
//! h₂(x, y, t) = h(x, y, t) - h₁(x, t) - h₁(y, t) - U(t)
//! ```
//!
//! The expectations come from a [`UDistribution`] attached to the kernel, or
//! failing that from a [`MarginalOracle`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::empirical;
use crate::marginal::Marginal;
use crate::math;
use crate::processes::ProcessModel;
use crate::rng::{rng_for, stream};
use crate::{Error, Result};

/// Pair statistic `s(x, y)` behind an indicator kernel `1{s(x, y) <= t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatistic {
    PairMean,
    PairAbsDiff,
}

impl PairStatistic {
    #[inline]
    pub fn value(self, x: f64, y: f64) -> f64 {
        match self {
            PairStatistic::PairMean => (x + y) * 0.5,
            PairStatistic::PairAbsDiff => math::abs(x - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PairStatistic::PairMean => "pair_mean",
            PairStatistic::PairAbsDiff => "pair_absdiff",
        }
    }

    /// Norm of the gradient of `s`: how far `s` can move when `(x, y)` moves
    /// by `ε` in Euclidean distance.
    fn lipschitz(self) -> f64 {
        match self {
            PairStatistic::PairMean => 1.0 / SQRT_2,
            PairStatistic::PairAbsDiff => SQRT_2,
        }
    }
}

/// Population quantities of a kernel under a fixed marginal law.
pub trait UDistribution: fmt::Debug + Send + Sync {
    /// `U(t) = E h(X, Y, t)`.
    fn cdf(&self, t: f64) -> f64;
    /// `u(t) = U'(t)`.
    fn density(&self, t: f64) -> f64;
    /// `E h(x, Y, t)`.
    fn conditional(&self, x: f64, t: f64) -> f64;

    fn h1(&self, x: f64, t: f64) -> f64 {
        self.conditional(x, t) - self.cdf(t)
    }

    /// `true` for closed forms, `false` for numerical quadrature.
    fn is_closed_form(&self) -> bool;
}

/// Hodges–Lehmann kernel under a `N(mean, sd²)` marginal:
/// `(X + Y)/2 ~ N(mean, sd²/2)`.
#[derive(Debug, Clone, Copy)]
pub struct NormalPairMean {
    pub mean: f64,
    pub sd: f64,
}

impl UDistribution for NormalPairMean {
    fn cdf(&self, t: f64) -> f64 {
        math::normal_cdf(SQRT_2 * (t - self.mean) / self.sd)
    }

    fn density(&self, t: f64) -> f64 {
        SQRT_2 / self.sd * math::normal_pdf(SQRT_2 * (t - self.mean) / self.sd)
    }

    fn conditional(&self, x: f64, t: f64) -> f64 {
        math::normal_cdf((2.0 * t - x - self.mean) / self.sd)
    }

    fn is_closed_form(&self) -> bool {
        true
    }
}

/// Qn kernel under a normal marginal: `|X - Y|` is half-normal with scale
/// `sd·√2`.
#[derive(Debug, Clone, Copy)]
pub struct NormalPairAbsDiff {
    pub mean: f64,
    pub sd: f64,
}

impl UDistribution for NormalPairAbsDiff {
    fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            2.0 * math::normal_cdf(t / (SQRT_2 * self.sd)) - 1.0
        }
    }

    fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            2.0 / (SQRT_2 * self.sd) * math::normal_pdf(t / (SQRT_2 * self.sd))
        }
    }

    fn conditional(&self, x: f64, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let z = |v: f64| math::normal_cdf((v - self.mean) / self.sd);
        z(x + t) - z(x - t)
    }

    fn is_closed_form(&self) -> bool {
        true
    }
}

/// The constant kernel `h ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantU {
    pub value: f64,
}

impl UDistribution for ConstantU {
    fn cdf(&self, _t: f64) -> f64 {
        self.value
    }

    fn density(&self, _t: f64) -> f64 {
        0.0
    }

    fn conditional(&self, _x: f64, _t: f64) -> f64 {
        self.value
    }

    fn is_closed_form(&self) -> bool {
        true
    }
}

const QUADRATURE_PANELS: usize = 2048;
const CUSTOM_NODES: usize = 512;

/// U-distribution of a kernel under an arbitrary marginal, by quadrature.
///
/// Indicator kernels are integrated in `x` against the marginal density
/// with composite Simpson, splitting at the points where the integrand has
/// kinks. Custom kernels use a midpoint rule in quantile space.
#[derive(Debug, Clone)]
pub struct QuadratureU {
    form: KernelForm,
    marginal: Arc<dyn Marginal>,
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
}

impl QuadratureU {
    pub fn new(kernel: &KernelSpec, marginal: Arc<dyn Marginal>) -> Self {
        let (mut lo, mut hi) = marginal.support();
        if !lo.is_finite() {
            lo = marginal.quantile(1e-14);
        }
        if !hi.is_finite() {
            hi = marginal.quantile(1.0 - 1e-14);
        }
        let nodes = match kernel.form {
            KernelForm::Custom(_) => (0..CUSTOM_NODES)
                .map(|i| marginal.quantile((i as f64 + 0.5) / CUSTOM_NODES as f64))
                .collect(),
            _ => Vec::new(),
        };
        Self {
            form: kernel.form.clone(),
            marginal,
            lo,
            hi,
            nodes,
        }
    }

    fn integrate(&self, f: impl Fn(f64) -> f64, mut breaks: Vec<f64>) -> f64 {
        breaks.retain(|b| *b > self.lo && *b < self.hi);
        breaks.push(self.lo);
        breaks.push(self.hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            // endpoints one ulp inside, so jumps at breaks use one-sided limits
            .map(|w| (w[0].next_up(), w[1].next_down()))
            .filter(|(a, b)| a < b)
            .map(|(a, b)| math::simpson(&f, a, b, QUADRATURE_PANELS))
            .sum()
    }

    fn indicator_breaks(&self, stat: PairStatistic, t: f64) -> Vec<f64> {
        match stat {
            PairStatistic::PairMean => vec![2.0 * t - self.hi, 2.0 * t - self.lo],
            PairStatistic::PairAbsDiff => vec![self.lo + t, self.hi - t],
        }
    }
}

impl UDistribution for QuadratureU {
    fn cdf(&self, t: f64) -> f64 {
        match &self.form {
            KernelForm::Indicator(stat) => {
                if *stat == PairStatistic::PairAbsDiff && t < 0.0 {
                    return 0.0;
                }
                let m = &self.marginal;
                self.integrate(
                    |x| m.pdf(x) * self.conditional(x, t),
                    self.indicator_breaks(*stat, t),
                )
                .clamp(0.0, 1.0)
            }
            KernelForm::Constant(c) => *c,
            KernelForm::Custom(h) => {
                let acc = math::compensated_sum(
                    self.nodes
                        .iter()
                        .flat_map(|&x| self.nodes.iter().map(move |&y| h(x, y, t))),
                );
                acc / (self.nodes.len() * self.nodes.len()) as f64
            }
        }
    }

    fn density(&self, t: f64) -> f64 {
        let m = &self.marginal;
        match &self.form {
            KernelForm::Indicator(PairStatistic::PairMean) => self.integrate(
                |x| 2.0 * m.pdf(x) * m.pdf(2.0 * t - x),
                self.indicator_breaks(PairStatistic::PairMean, t),
            ),
            KernelForm::Indicator(PairStatistic::PairAbsDiff) => {
                if t < 0.0 {
                    return 0.0;
                }
                self.integrate(
                    |x| m.pdf(x) * (m.pdf(x + t) + m.pdf(x - t)),
                    self.indicator_breaks(PairStatistic::PairAbsDiff, t),
                )
            }
            KernelForm::Constant(_) => 0.0,
            KernelForm::Custom(_) => {
                let h = 1e-4;
                (self.cdf(t + h) - self.cdf(t - h)) / (2.0 * h)
            }
        }
    }

    fn conditional(&self, x: f64, t: f64) -> f64 {
        let m = &self.marginal;
        match &self.form {
            KernelForm::Indicator(PairStatistic::PairMean) => m.cdf(2.0 * t - x),
            KernelForm::Indicator(PairStatistic::PairAbsDiff) => {
                if t < 0.0 {
                    0.0
                } else {
                    m.cdf(x + t) - m.cdf(x - t)
                }
            }
            KernelForm::Constant(c) => *c,
            KernelForm::Custom(h) => {
                math::compensated_sum(self.nodes.iter().map(|&y| h(x, y, t)))
                    / self.nodes.len() as f64
            }
        }
    }

    fn is_closed_form(&self) -> bool {
        false
    }
}

pub type KernelFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelForm {
    Indicator(PairStatistic),
    Constant(f64),
    Custom(KernelFn),
}

impl fmt::Debug for KernelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelForm::Indicator(s) => f.debug_tuple("Indicator").field(s).finish(),
            KernelForm::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            KernelForm::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A bounded symmetric kernel, optionally bound to the U-distribution of a
/// particular marginal law.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    name: String,
    form: KernelForm,
    bound: f64,
    analytic: Option<Arc<dyn UDistribution>>,
}

/// Hodges–Lehmann kernel `1{(x + y)/2 <= t}`.
pub fn make_hl_kernel() -> KernelSpec {
    KernelSpec::indicator("hl", PairStatistic::PairMean)
}

/// Qn kernel `1{|x - y| <= t}`.
pub fn make_qn_kernel() -> KernelSpec {
    KernelSpec::indicator("qn", PairStatistic::PairAbsDiff)
}

impl KernelSpec {
    pub fn indicator(name: impl Into<String>, stat: PairStatistic) -> Self {
        Self {
            name: name.into(),
            form: KernelForm::Indicator(stat),
            bound: 1.0,
            analytic: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            name: format!("const({value})"),
            form: KernelForm::Constant(value),
            bound: value.max(0.0),
            analytic: Some(Arc::new(ConstantU { value })),
        }
    }

    /// User kernel. The caller is responsible for symmetry, monotonicity in
    /// `t` and `0 <= h <= bound`.
    pub fn custom(
        name: impl Into<String>,
        bound: f64,
        eval: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            form: KernelForm::Custom(Arc::new(eval)),
            bound,
            analytic: None,
        }
    }

    pub fn with_analytic(mut self, analytic: Arc<dyn UDistribution>) -> Self {
        self.analytic = Some(analytic);
        self
    }

    /// Attach the U-distribution for `marginal`: closed form for indicator
    /// kernels under a normal marginal, quadrature otherwise.
    pub fn bind_marginal(&self, marginal: Arc<dyn Marginal>) -> Self {
        let analytic: Arc<dyn UDistribution> = match (&self.form, marginal.normal_params()) {
            (KernelForm::Indicator(PairStatistic::PairMean), Some((mean, sd))) => {
                Arc::new(NormalPairMean { mean, sd })
            }
            (KernelForm::Indicator(PairStatistic::PairAbsDiff), Some((mean, sd))) => {
                Arc::new(NormalPairAbsDiff { mean, sd })
            }
            (KernelForm::Constant(c), _) => Arc::new(ConstantU { value: *c }),
            _ => Arc::new(QuadratureU::new(self, marginal)),
        };
        self.clone().with_analytic(analytic)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn analytic(&self) -> Option<&Arc<dyn UDistribution>> {
        self.analytic.as_ref()
    }

    pub fn pair_statistic(&self) -> Option<PairStatistic> {
        match self.form {
            KernelForm::Indicator(s) => Some(s),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match &self.form {
            KernelForm::Indicator(s) => {
                if s.value(x, y) <= t {
                    1.0
                } else {
                    0.0
                }
            }
            KernelForm::Constant(c) => *c,
            KernelForm::Custom(h) => h(x, y, t),
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// One-argument kernel `g(x, t)`, nondecreasing in `t`. The classical
/// empirical distribution function uses `g(x, t) = 1{x <= t}`.
#[derive(Clone)]
pub enum ScalarKernel {
    Indicator,
    Constant(f64),
    Custom {
        name: String,
        bound: f64,
        eval: ScalarFn,
    },
}

impl fmt::Debug for ScalarKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarKernel::Indicator => f.write_str("Indicator"),
            ScalarKernel::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            ScalarKernel::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl ScalarKernel {
    pub fn custom(
        name: impl Into<String>,
        bound: f64,
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarKernel::Custom {
            name: name.into(),
            bound,
            eval: Arc::new(eval),
        }
    }

    /// `x ↦ E h(x, Y, t)` of a kernel bound to a marginal, as a one-argument
    /// kernel. It differs from `h₁` only by the constant `U(t)`.
    pub fn conditional_expectation(kernel: &KernelSpec) -> Result<Self> {
        let analytic = kernel.analytic().cloned().ok_or(Error::MissingMarginal)?;
        Ok(ScalarKernel::custom(
            format!("E[{}](x, Y)", kernel.name()),
            kernel.bound(),
            move |x, t| analytic.conditional(x, t),
        ))
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            ScalarKernel::Indicator => {
                if x <= t {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarKernel::Constant(c) => *c,
            ScalarKernel::Custom { eval, .. } => eval(x, t),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            ScalarKernel::Indicator => 1.0,
            ScalarKernel::Constant(c) => c.max(0.0),
            ScalarKernel::Custom { bound, .. } => *bound,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ScalarKernel::Indicator => "indicator",
            ScalarKernel::Constant(_) => "constant",
            ScalarKernel::Custom { name, .. } => name,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, ScalarKernel::Indicator)
    }
}

/// Size of the reference sample drawn by [`MarginalOracle::reference_from`].
pub const DEFAULT_REFERENCE_SIZE: usize = 100_000;

/// Source of expectations over the marginal when the kernel itself carries
/// no U-distribution.
#[derive(Debug, Clone)]
pub enum MarginalOracle {
    Analytic(Arc<dyn Marginal>),
    /// iid draws from the marginal; kept sorted.
    Reference(Vec<f64>),
}

impl MarginalOracle {
    pub fn reference(mut sample: Vec<f64>) -> Self {
        sample.sort_unstable_by(f64::total_cmp);
        MarginalOracle::Reference(sample)
    }

    /// iid reference sample of `size` marginal draws from `process`.
    pub fn reference_from(process: &ProcessModel, size: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, stream::REFERENCE);
        let sample = (0..size).map(|_| process.draw_marginal(&mut rng)).collect();
        Self::reference(sample)
    }
}

/// Hoeffding components of a kernel at a fixed `t`, all computed from one
/// source for `U`, so that `h = U + h₁(x) + h₁(y) + h₂(x, y)` holds exactly
/// up to rounding.
#[derive(Debug, Clone)]
pub struct Hoeffding<'a> {
    kernel: &'a KernelSpec,
    t: f64,
    u_t: f64,
    source: ExpectationSource<'a>,
}

#[derive(Debug, Clone)]
enum ExpectationSource<'a> {
    Analytic(Arc<dyn UDistribution>),
    Reference(&'a [f64]),
}

impl<'a> Hoeffding<'a> {
    /// Precedence: the kernel's own U-distribution, then an analytic
    /// marginal, then a reference sample.
    pub fn new(
        kernel: &'a KernelSpec,
        t: f64,
        marginal: Option<&'a MarginalOracle>,
    ) -> Result<Self> {
        let source = match (kernel.analytic(), marginal) {
            (Some(a), _) => ExpectationSource::Analytic(a.clone()),
            (None, Some(MarginalOracle::Analytic(m))) => ExpectationSource::Analytic(
                kernel
                    .bind_marginal(m.clone())
                    .analytic
                    .ok_or(Error::MissingMarginal)?,
            ),
            (None, Some(MarginalOracle::Reference(s))) if !s.is_empty() => {
                ExpectationSource::Reference(s)
            }
            _ => return Err(Error::MissingMarginal),
        };
        let u_t = match &source {
            ExpectationSource::Analytic(a) => a.cdf(t),
            ExpectationSource::Reference(s) => reference_u(kernel, s, t),
        };
        Ok(Self {
            kernel,
            t,
            u_t,
            source,
        })
    }

    pub fn u(&self) -> f64 {
        self.u_t
    }

    /// `E h(x, Y, t)`.
    pub fn conditional(&self, x: f64) -> f64 {
        match &self.source {
            ExpectationSource::Analytic(a) => a.conditional(x, self.t),
            ExpectationSource::Reference(s) => reference_conditional(self.kernel, s, x, self.t),
        }
    }

    pub fn h1(&self, x: f64) -> f64 {
        self.conditional(x) - self.u_t
    }

    pub fn h2(&self, x: f64, y: f64) -> f64 {
        self.kernel.eval(x, y, self.t) - (self.h1(x) + self.h1(y)) - self.u_t
    }
}

/// `h₁(x, t) = E h(x, Y, t) - U(t)`.
pub fn h1_value(
    kernel: &KernelSpec,
    x: f64,
    t: f64,
    marginal: Option<&MarginalOracle>,
) -> Result<f64> {
    Ok(Hoeffding::new(kernel, t, marginal)?.h1(x))
}

/// `h₂(x, y, t) = h(x, y, t) - h₁(x, t) - h₁(y, t) - U(t)`.
pub fn h2_value(
    kernel: &KernelSpec,
    x: f64,
    y: f64,
    t: f64,
    marginal: Option<&MarginalOracle>,
) -> Result<f64> {
    Ok(Hoeffding::new(kernel, t, marginal)?.h2(x, y))
}

fn reference_conditional(kernel: &KernelSpec, sorted: &[f64], x: f64, t: f64) -> f64 {
    match kernel.form {
        KernelForm::Indicator(stat) => {
            empirical::count_partners_le(sorted, stat, x, t) as f64 / sorted.len() as f64
        }
        _ => {
            math::compensated_sum(sorted.iter().map(|&y| kernel.eval(x, y, t)))
                / sorted.len() as f64
        }
    }
}

fn reference_u(kernel: &KernelSpec, sorted: &[f64], t: f64) -> f64 {
    let m = sorted.len();
    if m < 2 {
        return kernel.eval(sorted[0], sorted[0], t);
    }
    match kernel.form {
        KernelForm::Indicator(stat) => {
            empirical::count_pairs_le_sorted(sorted, stat, t) as f64
                / empirical::pair_count(m) as f64
        }
        _ => {
            // disjoint pairs of an iid sample
            let half = m / 2;
            math::compensated_sum((0..half).map(|i| kernel.eval(sorted[i], sorted[i + half], t)))
                / half as f64
        }
    }
}

/// `Uₙ(t) - U(t) - (2/n) Σ h₁(Xᵢ, t) - (2/(n(n-1))) Σ_{i<j} h₂(Xᵢ, Xⱼ, t)`,
/// every term enumerated directly. Zero up to rounding for any sample.
pub fn hoeffding_residual(
    sample: &[f64],
    kernel: &KernelSpec,
    t: f64,
    marginal: Option<&MarginalOracle>,
) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let hd = Hoeffding::new(kernel, t, marginal)?;
    let pairs = empirical::pair_count(n) as f64;
    let mut u_n = math::CompensatedSum::new();
    let mut h2 = math::CompensatedSum::new();
    for i in 0..n {
        for j in i + 1..n {
            u_n.add(kernel.eval(sample[i], sample[j], t));
            h2.add(hd.h2(sample[i], sample[j]));
        }
    }
    let h1 = math::compensated_sum(sample.iter().map(|&x| hd.h1(x)));
    Ok(u_n.value() / pairs - hd.u() - 2.0 * h1 / n as f64 - h2.value() / pairs)
}

/// Monte Carlo estimate of the variation constant `L` of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationEstimate {
    pub kernel: String,
    pub t: f64,
    pub epsilons: Vec<f64>,
    pub estimates: Vec<f64>,
    #[serde(rename = "fitted_L")]
    pub fitted_l: f64,
    /// Standard error of `fitted_l` across replicates.
    #[serde(rename = "fitted_L_se")]
    pub fitted_l_se: f64,
    pub reps: usize,
    pub seed: u64,
}

fn validate_grid(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty()
        || epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite())
        || epsilons.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidGrid);
    }
    Ok(())
}

/// Oscillation `sup |h(x, y, t) - h(x', y', t)|` over the Euclidean ε-ball
/// around `(x0, y0)`. Exact for indicator and constant kernels; for custom
/// kernels a lower bound from the centre and 16 boundary points.
pub fn kernel_oscillation(kernel: &KernelSpec, x0: f64, y0: f64, t: f64, eps: f64) -> f64 {
    match &kernel.form {
        KernelForm::Indicator(stat) => {
            if *stat == PairStatistic::PairAbsDiff && t < 0.0 {
                return 0.0;
            }
            let s = stat.value(x0, y0);
            let r = stat.lipschitz() * eps;
            if s > t - r && s <= t + r {
                1.0
            } else {
                0.0
            }
        }
        KernelForm::Constant(_) => 0.0,
        KernelForm::Custom(h) => {
            let mut lo = h(x0, y0, t);
            let mut hi = lo;
            for k in 0..16 {
                let angle = 2.0 * PI * k as f64 / 16.0;
                let v = h(x0 + eps * libm::cos(angle), y0 + eps * libm::sin(angle), t);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        }
    }
}

/// Oscillation of a one-argument kernel over `[x0 - ε, x0 + ε]`. Exact for
/// the indicator and for monotone custom kernels (17-point grid including
/// both endpoints).
pub fn scalar_oscillation(g: &ScalarKernel, x0: f64, t: f64, eps: f64) -> f64 {
    match g {
        ScalarKernel::Indicator => {
            if x0 > t - eps && x0 <= t + eps {
                1.0
            } else {
                0.0
            }
        }
        ScalarKernel::Constant(_) => 0.0,
        ScalarKernel::Custom { eval, .. } => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..=16 {
                let v = eval(x0 - eps + 2.0 * eps * k as f64 / 16.0, t);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        }
    }
}

/// Estimate `L` in `E[sup over ε-balls |h - h'|] <= L ε` for a two-argument
/// kernel, with `(X, Y)` independent draws from the process marginal.
pub fn estimate_variation_constant(
    kernel: &KernelSpec,
    process: &ProcessModel,
    t: f64,
    epsilons: &[f64],
    reps: usize,
    seed: u64,
) -> Result<VariationEstimate> {
    let draws = draw_pairs(process, reps, epsilons, seed, 2)?;
    let rows = draws
        .chunks_exact(2)
        .map(|xy| {
            epsilons
                .iter()
                .map(|&e| kernel_oscillation(kernel, xy[0], xy[1], t, e))
                .collect()
        })
        .collect();
    Ok(summarise_variation(
        kernel.name().to_string(),
        t,
        epsilons,
        rows,
        seed,
    ))
}

/// One-argument version of [`estimate_variation_constant`]: `sup` over
/// `|x - X| <= ε` and `|x' - X| <= ε`.
pub fn estimate_variation_constant_scalar(
    g: &ScalarKernel,
    process: &ProcessModel,
    t: f64,
    epsilons: &[f64],
    reps: usize,
    seed: u64,
) -> Result<VariationEstimate> {
    let draws = draw_pairs(process, reps, epsilons, seed, 1)?;
    let rows = draws
        .iter()
        .map(|&x| {
            epsilons
                .iter()
                .map(|&e| scalar_oscillation(g, x, t, e))
                .collect()
        })
        .collect();
    Ok(summarise_variation(
        g.name().to_string(),
        t,
        epsilons,
        rows,
        seed,
    ))
}

fn draw_pairs(
    process: &ProcessModel,
    reps: usize,
    epsilons: &[f64],
    seed: u64,
    per_rep: usize,
) -> Result<Vec<f64>> {
    validate_grid(epsilons)?;
    if reps < 100 {
        return Err(Error::param(
            "reps",
            format!("need at least 100 replicates, got {reps}"),
        ));
    }
    let mut rng = rng_for(seed, stream::VARIATION);
    Ok((0..reps * per_rep)
        .map(|_| process.draw_marginal(&mut rng))
        .collect())
}

fn summarise_variation(
    kernel: String,
    t: f64,
    epsilons: &[f64],
    rows: Vec<Vec<f64>>,
    seed: u64,
) -> VariationEstimate {
    let reps = rows.len();
    let eps_sq: f64 = epsilons.iter().map(|e| e * e).sum();
    let raw: Vec<f64> = (0..epsilons.len())
        .map(|i| {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            math::stable_mean(&col)
        })
        .collect();
    let estimates = isotonic_nondecreasing(&raw);
    let fitted_l =
        math::compensated_sum(epsilons.iter().zip(&estimates).map(|(e, v)| e * v)) / eps_sq;
    let per_rep: Vec<f64> = rows
        .iter()
        .map(|r| math::compensated_sum(epsilons.iter().zip(r).map(|(e, v)| e * v)) / eps_sq)
        .collect();
    let (_, fitted_l_se) = math::mean_and_se(&per_rep);
    VariationEstimate {
        kernel,
        t,
        epsilons: epsilons.to_vec(),
        estimates,
        fitted_l,
        fitted_l_se,
        reps,
        seed,
    }
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (equal weights).
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (
                (m1 * w1 as f64 + m2 * w2 as f64) / (w1 + w2) as f64,
                w1 + w2,
            );
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, w)| core::iter::repeat_n(m, w))
        .collect()
}
