//! Kernels addressable by name and the population truth for a statistic.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uquant_core::bahadur::{QuantileStatistic, QuantileTruth};
use uquant_core::kernels::{make_hl_kernel, make_qn_kernel, KernelSpec, ScalarKernel};
use uquant_core::processes::ProcessModel;
use uquant_core::Error;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    /// Sample quantile, `g(x, t) = 1{x <= t}`.
    Quantile,
    /// U-quantile of a two-argument kernel.
    UQuantile,
}

/// Named kernels; `hl` and `qn` are always present.
#[derive(Debug, Clone)]
pub struct KernelRegistry {
    kernels: BTreeMap<String, KernelSpec>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        let mut kernels = BTreeMap::new();
        for k in [make_hl_kernel(), make_qn_kernel()] {
            kernels.insert(k.name().to_string(), k);
        }
        Self { kernels }
    }
}

impl KernelRegistry {
    /// Adds or replaces a kernel under its own name.
    pub fn register(&mut self, kernel: KernelSpec) {
        self.kernels.insert(kernel.name().to_string(), kernel);
    }

    pub fn get(&self, name: &str) -> CliResult<&KernelSpec> {
        self.kernels.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.kernels.keys().map(String::as_str).collect();
            CliError::usage(format!(
                "unknown kernel `{name}` (known: {})",
                known.join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.kernels.keys().map(String::as_str)
    }
}

/// The statistic, with the kernel bound to the process marginal when one
/// is known.
pub fn build_statistic(
    registry: &KernelRegistry,
    kind: StatisticKind,
    kernel: Option<&str>,
    process: &ProcessModel,
) -> CliResult<QuantileStatistic> {
    match kind {
        StatisticKind::Quantile => Ok(QuantileStatistic::Quantile(ScalarKernel::Indicator)),
        StatisticKind::UQuantile => {
            let name = kernel
                .ok_or_else(|| CliError::usage("--statistic u-quantile requires --kernel"))?;
            let spec = registry.get(name)?;
            let bound = match process.marginal() {
                Some(m) if spec.analytic().is_none() => spec.bind_marginal(Arc::clone(m)),
                _ => spec.clone(),
            };
            Ok(QuantileStatistic::UQuantile(bound))
        }
    }
}

/// `t_p` and the density there, from the marginal of `process`.
pub fn derive_truth(
    process: &ProcessModel,
    statistic: &QuantileStatistic,
    p: f64,
) -> Result<QuantileTruth, Error> {
    let no_marginal = || {
        Error::NoTruth(format!(
            "process `{}` has no known marginal",
            process.name()
        ))
    };
    match statistic {
        QuantileStatistic::Quantile(_) => {
            let m = process.marginal().ok_or_else(no_marginal)?;
            QuantileTruth::for_marginal(p, m.as_ref())
        }
        QuantileStatistic::UQuantile(k) => {
            if k.analytic().is_none() {
                return Err(no_marginal());
            }
            QuantileTruth::for_kernel(p, k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_kernels() {
        let r = KernelRegistry::default();
        assert_eq!(r.names().collect::<Vec<_>>(), ["hl", "qn"]);
        assert!(matches!(r.get("xyz"), Err(CliError::Usage(_))));
    }

    #[test]
    fn user_kernels_can_be_registered() {
        let mut r = KernelRegistry::default();
        r.register(KernelSpec::constant(0.5));
        let name = KernelSpec::constant(0.5).name().to_string();
        assert!(r.get(&name).is_ok());
    }

    #[test]
    fn truth_for_standard_normal_median_and_hl() {
        let r = KernelRegistry::default();
        let p = ProcessModel::iid_normal();
        let q = build_statistic(&r, StatisticKind::Quantile, None, &p).unwrap();
        let t = derive_truth(&p, &q, 0.5).unwrap();
        assert!(t.t_p.abs() < 1e-12);
        let hl = build_statistic(&r, StatisticKind::UQuantile, Some("hl"), &p).unwrap();
        let t = derive_truth(&p, &hl, 0.5).unwrap();
        assert!((t.density_at_tp - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_unknown_marginals() {
        let r = KernelRegistry::default();
        let c = ProcessModel::constant(1.0);
        let q = build_statistic(&r, StatisticKind::Quantile, None, &c).unwrap();
        assert!(matches!(
            derive_truth(&c, &q, 0.5),
            Err(Error::DegenerateDensity(_))
        ));
        let lin = crate::process_spec::parse_process("lin:a=4").unwrap();
        let q = build_statistic(&r, StatisticKind::Quantile, None, &lin).unwrap();
        assert!(matches!(
            derive_truth(&lin, &q, 0.5),
            Err(Error::NoTruth(_))
        ));
    }
}
