//! Seeded generators of stationary sequences.
//!
//! Each [`ProcessModel`] carries a declared [`Dependence`] class. The mixing
//! or approximation rates are metadata supplied with the construction; they
//! are never estimated from a realisation.
//!
//! All generators draw their randomness sequentially from one ChaCha stream
//! and never look ahead, so `generate(n, seed)` is always a prefix of
//! `generate(m, seed)` for `m >= n`. Rate studies rely on this to reuse one
//! path across a whole grid of sample sizes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::marginal::{GaussMeasure, Marginal, Normal, PointMass};
use crate::math;
use crate::rng::{rng_for, stream};
use crate::{Error, Result};

/// Declared dependence class. `beta = f64::INFINITY` stands for geometric
/// (exponential) decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Dependence {
    Iid,
    MDependent { lag: usize },
    StrongMixing { beta: f64 },
    ApproxFunctional { beta: f64 },
}

/// The two rate conditions under which the remainder exponent is stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCondition {
    /// Strong mixing with `α(n) = O(n^-β)`.
    StrongMixing,
    /// 1-approximating functional of an absolutely regular process.
    ApproxFunctional,
}

/// Dependence exponent γ: `(β-2)/β` under strong mixing (`β >= 3`),
/// `(β-3)/(β+1)` for approximating functionals (`β > 3`). An infinite β
/// gives the iid limit γ = 1.
pub fn gamma_exponent(condition: RateCondition, beta: f64) -> Result<f64> {
    match condition {
        RateCondition::StrongMixing => {
            if beta.is_nan() || beta < 3.0 {
                return Err(Error::OutOfRange {
                    what: "beta",
                    value: beta,
                    expected: ">= 3 under strong mixing",
                });
            }
            if beta.is_infinite() {
                return Ok(1.0);
            }
            Ok((beta - 2.0) / beta)
        }
        RateCondition::ApproxFunctional => {
            if beta.is_nan() || beta <= 3.0 {
                return Err(Error::OutOfRange {
                    what: "beta",
                    value: beta,
                    expected: "> 3 for approximating functionals",
                });
            }
            if beta.is_infinite() {
                return Ok(1.0);
            }
            Ok((beta - 3.0) / (beta + 1.0))
        }
    }
}

/// Threshold on β for U-quantile results under strong mixing.
pub const U_QUANTILE_MIN_MIXING_BETA: f64 = 13.0 / 4.0;

impl Dependence {
    /// γ implied by the declared class. Independent and m-dependent
    /// sequences have `α(k) = 0` eventually, hence γ = 1.
    pub fn gamma(&self) -> Result<f64> {
        match *self {
            Dependence::Iid | Dependence::MDependent { .. } => Ok(1.0),
            Dependence::StrongMixing { beta } => gamma_exponent(RateCondition::StrongMixing, beta),
            Dependence::ApproxFunctional { beta } => {
                gamma_exponent(RateCondition::ApproxFunctional, beta)
            }
        }
    }

    /// γ for U-quantile studies, which need `β >= 13/4` under strong mixing.
    pub fn gamma_for_u_quantile(&self) -> Result<f64> {
        if let Dependence::StrongMixing { beta } = *self {
            if beta < U_QUANTILE_MIN_MIXING_BETA {
                return Err(Error::OutOfRange {
                    what: "beta",
                    value: beta,
                    expected: ">= 13/4 for U-quantiles under strong mixing",
                });
            }
        }
        self.gamma()
    }
}

impl fmt::Display for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn rate(beta: f64) -> String {
            if beta.is_infinite() {
                "exponential".to_string()
            } else {
                format!("beta={beta}")
            }
        }
        match *self {
            Dependence::Iid => f.write_str("iid"),
            Dependence::MDependent { lag } => write!(f, "{lag}-dependent"),
            Dependence::StrongMixing { beta } => write!(f, "strong-mixing({})", rate(beta)),
            Dependence::ApproxFunctional { beta } => {
                write!(f, "approximating-functional({})", rate(beta))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    Rademacher,
    Poisson { lambda: f64 },
}

impl Innovation {
    /// `E|Z₁|`.
    pub fn abs_moment(&self) -> f64 {
        match *self {
            Innovation::Rademacher => 1.0,
            Innovation::Poisson { lambda } => lambda,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Innovation::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Innovation::Poisson { lambda } => {
                Poisson::new(lambda).map(|d| d.sample(rng)).unwrap_or(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub process_name: String,
    pub seed: u64,
}

impl SamplePath {
    pub fn new(values: Vec<f64>, process_name: impl Into<String>, seed: u64) -> Self {
        Self {
            values,
            process_name: process_name.into(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `n` observations as a path of its own.
    pub fn prefix(&self, n: usize) -> SamplePath {
        SamplePath {
            values: self.values[..n.min(self.values.len())].to_vec(),
            process_name: self.process_name.clone(),
            seed: self.seed,
        }
    }
}

impl core::ops::Deref for SamplePath {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// ℓ¹ tail of the linear-process coefficients below which the filter is cut.
pub const LINEAR_TRUNCATION_TOL: f64 = 1e-12;
/// Upper limit on the number of linear-process coefficients.
pub const LINEAR_MAX_TERMS: usize = 100_000;
/// Default number of discarded Gauss-map iterations.
pub const GAUSS_DEFAULT_BURN_IN: usize = 1000;
const GAUSS_GUARD: f64 = 1e-15;

#[derive(Debug, Clone)]
enum Generator {
    IidNormal,
    Ar1 {
        phi: f64,
    },
    MovingAverage {
        weights: Vec<f64>,
    },
    Linear {
        coeffs: Vec<f64>,
        innovation: Innovation,
    },
    GaussMap {
        burn_in: usize,
    },
    Constant {
        value: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ProcessModel {
    name: String,
    dependence: Dependence,
    marginal: Option<Arc<dyn Marginal>>,
    params: BTreeMap<String, f64>,
    generator: Generator,
}

impl ProcessModel {
    /// Standard normal iid sequence.
    pub fn iid_normal() -> Self {
        Self {
            name: "iid".into(),
            dependence: Dependence::Iid,
            marginal: Some(Arc::new(Normal::STANDARD)),
            params: BTreeMap::new(),
            generator: Generator::IidNormal,
        }
    }

    /// Gaussian AR(1) with unit marginal variance, started in stationarity.
    pub fn ar1_gaussian(phi: f64) -> Result<Self> {
        if !(phi.abs() < 1.0) {
            return Err(Error::param("phi", format!("|phi| must be < 1, got {phi}")));
        }
        let mut params = BTreeMap::new();
        params.insert("phi".into(), phi);
        Ok(Self {
            name: format!("ar1:phi={phi}"),
            dependence: Dependence::StrongMixing {
                beta: f64::INFINITY,
            },
            marginal: Some(Arc::new(Normal::STANDARD)),
            params,
            generator: Generator::Ar1 { phi },
        })
    }

    /// `X_n = Σ_{j=0}^{q} w_j ε_{n-j}` with standard normal ε.
    pub fn ma_q(q: usize, weights: &[f64]) -> Result<Self> {
        if q < 1 {
            return Err(Error::param("q", "lag count must be at least 1"));
        }
        if weights.len() != q + 1 {
            return Err(Error::param(
                "weights",
                format!(
                    "expected {} weights for q = {q}, got {}",
                    q + 1,
                    weights.len()
                ),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("weights", "weights must be finite"));
        }
        let sd = math::sqrt(weights.iter().map(|w| w * w).sum::<f64>());
        if sd == 0.0 {
            return Err(Error::param(
                "weights",
                "at least one weight must be nonzero",
            ));
        }
        let mut params = BTreeMap::new();
        params.insert("q".into(), q as f64);
        for (j, w) in weights.iter().enumerate() {
            params.insert(format!("w{j}"), *w);
        }
        let w_label: Vec<String> = weights.iter().map(|w| format!("{w}")).collect();
        Ok(Self {
            name: format!("ma:q={q},w={}", w_label.join(",")),
            dependence: Dependence::MDependent { lag: q },
            marginal: Some(Arc::new(Normal::new(0.0, sd))),
            params,
            generator: Generator::MovingAverage {
                weights: weights.to_vec(),
            },
        })
    }

    /// Causal linear process `X_n = Σ_{k>=1} k^{-a} Z_{n-k}` with discrete iid
    /// innovations, truncated once the coefficient tail drops below
    /// [`LINEAR_TRUNCATION_TOL`] (or at [`LINEAR_MAX_TERMS`] terms).
    ///
    /// The approximation constants `a_l = 2 E|Z₁| Σ_{k>l} k^{-a}` are
    /// `O(l^{1-a})`, so the declared class is an approximating functional
    /// with `β = a - 4`.
    pub fn linear_discrete(decay_a: f64, innovation: Innovation) -> Result<Self> {
        if !(decay_a > 1.0) || !decay_a.is_finite() {
            return Err(Error::param(
                "decay_a",
                format!("decay exponent must be > 1, got {decay_a}"),
            ));
        }
        if let Innovation::Poisson { lambda } = innovation {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::param("lambda", "Poisson rate must be positive"));
            }
        }
        let mut terms = 1usize;
        while terms < LINEAR_MAX_TERMS && power_tail(decay_a, terms) >= LINEAR_TRUNCATION_TOL {
            terms += 1 + terms / 8;
        }
        let terms = terms.min(LINEAR_MAX_TERMS);
        let coeffs: Vec<f64> = (1..=terms)
            .map(|k| math::powf(k as f64, -decay_a))
            .collect();

        let mut params = BTreeMap::new();
        params.insert("a".into(), decay_a);
        params.insert("abs_moment".into(), innovation.abs_moment());
        params.insert("terms".into(), terms as f64);
        params.insert("truncation_tail".into(), power_tail(decay_a, terms));
        if let Innovation::Poisson { lambda } = innovation {
            params.insert("lambda".into(), lambda);
        }
        for l in 0..=10 {
            params.insert(
                format!("a_{l}"),
                approximation_constant(decay_a, innovation.abs_moment(), l),
            );
        }
        let inn = match innovation {
            Innovation::Rademacher => "rademacher".to_string(),
            Innovation::Poisson { lambda } => format!("poisson({lambda})"),
        };
        Ok(Self {
            name: format!("lin:a={decay_a},inn={inn}"),
            dependence: Dependence::ApproxFunctional {
                beta: decay_a - 4.0,
            },
            marginal: None,
            params,
            generator: Generator::Linear { coeffs, innovation },
        })
    }

    /// Gauss continued-fraction map `x ↦ 1/x - ⌊1/x⌋` started from the Gauss
    /// measure. Trajectories are computed in double precision; they are
    /// pseudo-orbits and only their distributional behaviour is meaningful.
    pub fn gauss_map(burn_in: usize) -> Self {
        let mut params = BTreeMap::new();
        params.insert("burn_in".into(), burn_in as f64);
        Self {
            name: "gauss".into(),
            dependence: Dependence::ApproxFunctional {
                beta: f64::INFINITY,
            },
            marginal: Some(Arc::new(GaussMeasure)),
            params,
            generator: Generator::GaussMap { burn_in },
        }
    }

    /// Degenerate sequence repeating `value`.
    pub fn constant(value: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("value".into(), value);
        Self {
            name: format!("const:value={value}"),
            dependence: Dependence::Iid,
            marginal: Some(Arc::new(PointMass { value })),
            params,
            generator: Generator::Constant { value },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dependence(&self) -> Dependence {
        self.dependence
    }

    pub fn marginal(&self) -> Option<&Arc<dyn Marginal>> {
        self.marginal.as_ref()
    }

    pub fn marginal_cdf(&self, x: f64) -> Option<f64> {
        self.marginal.as_ref().map(|m| m.cdf(x))
    }

    pub fn marginal_quantile(&self, p: f64) -> Option<f64> {
        self.marginal.as_ref().map(|m| m.quantile(p))
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Deterministic path of length `n` for `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> SamplePath {
        let mut rng = rng_for(seed, stream::PATH);
        let values = match &self.generator {
            Generator::IidNormal => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            Generator::Ar1 { phi } => {
                let scale = math::sqrt(1.0 - phi * phi);
                let mut out = Vec::with_capacity(n);
                let mut x: f64 = StandardNormal.sample(&mut rng);
                for _ in 0..n {
                    out.push(x);
                    let e: f64 = StandardNormal.sample(&mut rng);
                    x = phi * x + scale * e;
                }
                out
            }
            Generator::MovingAverage { weights } => {
                let q = weights.len() - 1;
                // eps[i] holds ε_{i-q}
                let eps: Vec<f64> = (0..n + q)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                (0..n)
                    .map(|i| {
                        weights
                            .iter()
                            .enumerate()
                            .map(|(j, w)| w * eps[i + q - j])
                            .sum()
                    })
                    .collect()
            }
            Generator::Linear { coeffs, innovation } => {
                let k = coeffs.len();
                // z[i] holds Z_{i-k}; X_i (0-based) uses Z_{i-1}, ..., Z_{i-k}
                let z: Vec<f64> = (0..n + k).map(|_| innovation.draw(&mut rng)).collect();
                (0..n)
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, c) in coeffs.iter().enumerate() {
                            acc += c * z[i + k - 1 - j];
                        }
                        acc
                    })
                    .collect()
            }
            Generator::GaussMap { burn_in } => {
                let mut x = gauss_start(&mut rng);
                for _ in 0..*burn_in {
                    x = gauss_step(x, &mut rng);
                }
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(x);
                    x = gauss_step(x, &mut rng);
                }
                out
            }
            Generator::Constant { value } => alloc::vec![*value; n],
        };
        SamplePath::new(values, self.name.clone(), seed)
    }

    /// One draw from the marginal law. Uses the closed-form marginal when
    /// there is one, otherwise the first value of an independent path.
    pub fn draw_marginal(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.marginal {
            Some(m) => m.sample(rng),
            None => {
                let seed: u64 = rng.random();
                self.generate(1, seed).values[0]
            }
        }
    }
}

fn gauss_start(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        let x = GaussMeasure.quantile(u);
        if x >= GAUSS_GUARD {
            return x;
        }
    }
}

/// One step of the Gauss map; restarts from the Gauss measure if the orbit
/// falls below the guard (where `1/x` loses all precision).
pub fn gauss_map_step(x: f64) -> f64 {
    let inv = 1.0 / x;
    inv - math::floor(inv)
}

fn gauss_step(x: f64, rng: &mut ChaCha8Rng) -> f64 {
    let next = gauss_map_step(x);
    if next < GAUSS_GUARD {
        gauss_start(rng)
    } else {
        next
    }
}

/// `Σ_{k > m} k^{-a}` for `a > 1`: exact partial sum up to a cut-off, then
/// an Euler–Maclaurin tail.
pub fn power_tail(a: f64, m: usize) -> f64 {
    const CUT: usize = 2000;
    let mut acc = math::CompensatedSum::new();
    let start = m + 1;
    let end = start.max(CUT);
    for k in start..end {
        acc.add(math::powf(k as f64, -a));
    }
    // Σ_{k >= end} k^{-a} ≈ ∫_end^∞ + f(end)/2 - f'(end)/12 + f'''(end)/720
    let e = end as f64;
    let f = math::powf(e, -a);
    let integral = math::powf(e, 1.0 - a) / (a - 1.0);
    let d1 = -a * math::powf(e, -a - 1.0);
    let d3 = -a * (a + 1.0) * (a + 2.0) * math::powf(e, -a - 3.0);
    acc.add(integral + f / 2.0 - d1 / 12.0 + d3 / 720.0);
    acc.value()
}

/// Approximation constant `a_l = 2 E|Z₁| Σ_{k>l} k^{-a}` of the linear process.
pub fn approximation_constant(decay_a: f64, abs_moment: f64, l: usize) -> f64 {
    2.0 * abs_moment * power_tail(decay_a, l)
}
