//! U-quantile estimation for dependent sequences.
//!
//! The crate covers the pieces needed to study Bahadur representations of
//! sample quantiles and U-quantiles when the observations are weakly
//! dependent:
//!
//! - [`kernels`]: bounded symmetric kernels `h(x, y, t)`, their Hoeffding
//!   components `h₁`/`h₂`, and a Monte Carlo estimator of the variation
//!   constant `L`.
//! - [`processes`]: seeded generators for iid, AR(1), MA(q), linear processes
//!   with discrete innovations and the Gauss continued-fraction map, each
//!   carrying declared dependence metadata.
//! - [`empirical`]: empirical distribution functions, U-statistics and exact
//!   order-statistic selection over the implicit set of pair statistics.
//! - [`bahadur`]: remainders `Rₙ`/`R′ₙ`, local oscillation suprema and
//!   log-log rate studies.
//! - [`asymptotics`]: long-run variances, CLT intervals and LIL diagnostics.
//!
//! The crate is `no_std` and only needs `alloc`. Replicate loops go through
//! the [`exec::Executor`] trait so that callers with threads can plug in a
//! parallel backend without changing results.
#![cfg_attr(not(test), no_std)]
#![warn(rust_2018_idioms, unused_qualifications)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod bahadur;
pub mod empirical;
mod error;
pub mod exec;
pub mod kernels;
pub mod marginal;
pub mod math;
pub mod processes;
pub mod rng;

pub use error::{Error, Result};
