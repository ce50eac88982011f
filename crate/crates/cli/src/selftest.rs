//! Exactness checks bundled with the binary.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use uquant_core::empirical::{u_quantile_fast, EmpiricalUDist};
use uquant_core::exec::Executor;
use uquant_core::kernels::{
    hoeffding_residual, make_hl_kernel, make_qn_kernel, KernelSpec, MarginalOracle,
};
use uquant_core::marginal::Normal;
use uquant_core::processes::ProcessModel;
use uquant_core::rng::{derive_seed, rng_for, stream};

use crate::error::CliResult;

pub const SELFTEST_PROBABILITIES: [f64; 4] = [0.1, 0.25, 0.5, 0.9];
pub const HOEFFDING_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Largest deviation seen (0 for exact comparisons that all agree).
    pub worst: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Random sample for instance `i`: standard normal, rounded to a coarse
/// lattice on odd instances so that ties occur.
pub fn selftest_instance(seed: u64, i: usize) -> (Vec<f64>, f64) {
    let mut rng = rng_for(derive_seed(seed, i as u64), stream::SELFTEST);
    let n = rng.random_range(2..=200usize);
    let p = SELFTEST_PROBABILITIES[rng.random_range(0..SELFTEST_PROBABILITIES.len())];
    let path = ProcessModel::iid_normal().generate(n, rng.random());
    let sample = if i % 2 == 1 {
        path.iter().map(|x| (x * 4.0).round() / 4.0).collect()
    } else {
        path.to_vec()
    };
    (sample, p)
}

fn fast_vs_naive<E: Executor>(
    kernel: &KernelSpec,
    seed: u64,
    instances: usize,
    exec: &E,
) -> CliResult<Check> {
    let stat = kernel.pair_statistic().expect("indicator kernel");
    let outcomes = exec.map_indexed(instances, |i| -> CliResult<bool> {
        let (sample, p) = selftest_instance(seed, i);
        let fast = u_quantile_fast(&sample, stat, p)?;
        let naive = EmpiricalUDist::new(&sample, kernel)?.quantile(p)?;
        Ok(fast.to_bits() == naive.to_bits())
    });
    let mut failures = 0;
    for o in outcomes {
        failures += usize::from(!o?);
    }
    Ok(Check {
        name: format!("fast-equals-naive/{}", stat.name()),
        instances,
        failures,
        worst: 0.0,
        passed: failures == 0,
    })
}

/// Nine equally spaced `t` covering the bulk of the U-distribution.
pub fn hoeffding_grid(kernel: &KernelSpec) -> [f64; 9] {
    let start = if kernel.name() == "qn" { 0.0 } else { -1.0 };
    std::array::from_fn(|k| start + 0.25 * k as f64)
}

fn hoeffding_identity(kernel: &KernelSpec, seed: u64) -> CliResult<Check> {
    let oracle = MarginalOracle::Analytic(Arc::new(Normal::STANDARD));
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut instances = 0;
    for (j, n) in [10usize, 100].into_iter().enumerate() {
        let path = ProcessModel::iid_normal().generate(n, derive_seed(seed, 1_000_000 + j as u64));
        for t in hoeffding_grid(kernel) {
            let r = hoeffding_residual(&path, kernel, t, Some(&oracle))?.abs();
            worst = worst.max(r);
            // NaN counts as a failure
            failures += usize::from(r.is_nan() || r > HOEFFDING_TOLERANCE);
            instances += 1;
        }
    }
    Ok(Check {
        name: format!("hoeffding-identity/{}", kernel.name()),
        instances,
        failures,
        worst,
        passed: failures == 0,
    })
}

pub fn run_selftest<E: Executor>(
    seed: u64,
    instances: usize,
    exec: &E,
) -> CliResult<SelftestReport> {
    let mut checks = Vec::new();
    for k in [make_hl_kernel(), make_qn_kernel()] {
        checks.push(fast_vs_naive(&k, seed, instances, exec)?);
    }
    for k in [make_hl_kernel(), make_qn_kernel()] {
        checks.push(hoeffding_identity(&k, seed)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(SelftestReport { checks, passed })
}
