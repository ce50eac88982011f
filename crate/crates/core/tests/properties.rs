use std::sync::Arc;

use proptest::prelude::*;
use uquant_core::asymptotics::{h1_pseudo_values, long_run_variance};
use uquant_core::empirical::{
    count_pairs_le_sorted, u_quantile_fast, EmpiricalCdf, EmpiricalUDist,
};
use uquant_core::kernels::{
    make_hl_kernel, make_qn_kernel, Hoeffding, KernelSpec, MarginalOracle, PairStatistic,
    ScalarKernel,
};
use uquant_core::marginal::Normal;

fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    // a coarse lattice forces ties
    prop_oneof![
        prop::collection::vec(-100.0f64..100.0, 2..max),
        prop::collection::vec((-8i32..8).prop_map(|k| k as f64 * 0.25), 2..max),
    ]
}

fn kernels() -> [KernelSpec; 2] {
    [make_hl_kernel(), make_qn_kernel()]
}

fn naive_pairs(xs: &[f64], stat: PairStatistic) -> Vec<f64> {
    let mut v = Vec::new();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            v.push(stat.value(xs[i], xs[j]));
        }
    }
    v
}

proptest! {
    #[test]
    fn fast_u_quantile_equals_enumeration(xs in sample(120), p in 0.001f64..0.999) {
        for k in kernels() {
            let u = EmpiricalUDist::new(&xs, &k).unwrap();
            let fast = u.quantile_fast(p).unwrap();
            let slow = u.quantile(p).unwrap();
            prop_assert_eq!(fast.to_bits(), slow.to_bits(), "{}", k.name());
        }
    }

    #[test]
    fn galois_connection(xs in sample(80), p in 0.001f64..0.999) {
        for k in kernels() {
            let u = EmpiricalUDist::new(&xs, &k).unwrap();
            let q = u.quantile_fast(p).unwrap();
            prop_assert!(u.eval(q) >= p);
            prop_assert!(u.eval(q.next_down()) < p);
        }
        let g = ScalarKernel::Indicator;
        let f = EmpiricalCdf::new(&xs, &g).unwrap();
        let q = f.quantile(p).unwrap();
        prop_assert!(f.eval(q) >= p);
        prop_assert!(f.eval(q.next_down()) < p);
    }

    #[test]
    fn counting_matches_enumeration(xs in sample(80), t in -120.0f64..120.0) {
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        for stat in [PairStatistic::PairMean, PairStatistic::PairAbsDiff] {
            let brute = naive_pairs(&xs, stat).into_iter().filter(|&v| v <= t).count() as u64;
            prop_assert_eq!(count_pairs_le_sorted(&sorted, stat, t), brute);
        }
    }

    #[test]
    fn permutation_invariance(xs in sample(60), p in 0.01f64..0.99, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut ys = xs.clone();
        ys.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for stat in [PairStatistic::PairMean, PairStatistic::PairAbsDiff] {
            prop_assert_eq!(
                u_quantile_fast(&xs, stat, p).unwrap().to_bits(),
                u_quantile_fast(&ys, stat, p).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn u_distribution_is_monotone(xs in sample(60), a in -50.0f64..50.0, d in 0.0f64..50.0) {
        for k in kernels() {
            let u = EmpiricalUDist::new(&xs, &k).unwrap();
            let (lo, hi) = (u.eval(a), u.eval(a + d));
            prop_assert!(lo <= hi);
            prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
            prop_assert_eq!(u.eval(a), u.eval_naive(a));
        }
    }

    #[test]
    fn quantile_is_monotone_in_p(xs in sample(60), p in 0.01f64..0.98, d in 0.0f64..0.01) {
        for stat in [PairStatistic::PairMean, PairStatistic::PairAbsDiff] {
            prop_assert!(u_quantile_fast(&xs, stat, p).unwrap() <= u_quantile_fast(&xs, stat, p + d).unwrap());
        }
    }

    #[test]
    fn hoeffding_components_sum_to_kernel(x in -4.0f64..4.0, y in -4.0f64..4.0, t in -2.0f64..3.0) {
        let oracle = MarginalOracle::Analytic(Arc::new(Normal::STANDARD));
        for k in kernels() {
            let h = Hoeffding::new(&k, t, Some(&oracle)).unwrap();
            let back = h.u() + h.h1(x) + h.h1(y) + h.h2(x, y);
            prop_assert!((back - k.eval(x, y, t)).abs() <= 1e-12);
            prop_assert_eq!(h.h2(x, y), h.h2(y, x));
        }
    }

    #[test]
    fn pseudo_values_are_centred(xs in sample(80), t in -50.0f64..50.0) {
        for k in kernels() {
            let v = h1_pseudo_values(&xs, &k, t).unwrap();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!(mean.abs() <= 1e-12);
        }
    }

    #[test]
    fn lrv_is_nonnegative(xs in prop::collection::vec(-1e3f64..1e3, 8..300), b in prop::option::of(0usize..40)) {
        let est = long_run_variance(&xs, b).unwrap();
        prop_assert!(est.value >= 0.0);
        prop_assert!(est.bandwidth < est.series_length);
    }

    #[test]
    fn lrv_at_zero_bandwidth_is_variance(xs in prop::collection::vec(-1e3f64..1e3, 8..300)) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let est = long_run_variance(&xs, Some(0)).unwrap();
        prop_assert!((est.value - var).abs() <= 1e-9 * var.max(1.0));
    }
}
