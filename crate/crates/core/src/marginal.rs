//! One-dimensional marginal laws with closed-form CDF, density and quantile.

use core::f64::consts::LN_2;
use core::fmt::Debug;

use rand::Rng;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::math;

pub trait Marginal: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn cdf(&self, x: f64) -> f64;
    fn pdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;

    /// Closed interval carrying all the mass; infinite ends allowed.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `(mean, sd)` when the law is normal, enabling closed-form U-distributions.
    fn normal_params(&self) -> Option<(f64, f64)> {
        None
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

impl Normal {
    pub const STANDARD: Normal = Normal { mean: 0.0, sd: 1.0 };

    pub fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }
}

impl Marginal for Normal {
    fn name(&self) -> &'static str {
        "normal"
    }

    fn cdf(&self, x: f64) -> f64 {
        math::normal_cdf((x - self.mean) / self.sd)
    }

    fn pdf(&self, x: f64) -> f64 {
        math::normal_pdf((x - self.mean) / self.sd) / self.sd
    }

    fn quantile(&self, p: f64) -> f64 {
        self.mean + self.sd * math::normal_quantile(p)
    }

    fn normal_params(&self) -> Option<(f64, f64)> {
        Some((self.mean, self.sd))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.sd * z
    }
}

/// Gauss measure on `[0, 1]`: density `1 / (ln 2 · (1 + x))`, CDF `log₂(1 + x)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussMeasure;

impl Marginal for GaussMeasure {
    fn name(&self) -> &'static str {
        "gauss-measure"
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            math::log2(1.0 + x)
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            1.0 / (LN_2 * (1.0 + x))
        } else {
            0.0
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        math::powf(2.0, p.clamp(0.0, 1.0)) - 1.0
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Point mass at `value`; it has no density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub value: f64,
}

impl Marginal for PointMass {
    fn name(&self) -> &'static str {
        "point-mass"
    }

    fn cdf(&self, x: f64) -> f64 {
        if x >= self.value {
            1.0
        } else {
            0.0
        }
    }

    fn pdf(&self, _x: f64) -> f64 {
        0.0
    }

    fn quantile(&self, _p: f64) -> f64 {
        self.value
    }

    fn support(&self) -> (f64, f64) {
        (self.value, self.value)
    }

    fn sample(&self, _rng: &mut dyn RngCore) -> f64 {
        self.value
    }
}
