use flexshuffle::analysis::{
    mc_no_shuffle_prob, mc_uncovered_stats, p_miss_exact, p_outage, p_threshold, McConfig,
};
use proptest::prelude::*;

#[test]
fn disjoint_pairs_nowhere_count_matches_closed_form() {
    for (i, &(n, k, p)) in [(30, 10, 0.2f64), (50, 25, 0.1), (20, 5, 0.4)].iter().enumerate() {
        let s = mc_uncovered_stats(2 * k, n, k, 1, p, &[], &McConfig::new(4000, i as u64)).unwrap();
        let gap = (s.nowhere.mean - s.nowhere_expected).abs();
        assert!(gap <= 3.0 * s.nowhere.se.max(1e-9), "n={n} K={k} p={p}: {} vs {}", s.nowhere.mean, s.nowhere_expected);
    }
}

#[test]
fn uncovered_never_below_nowhere_count() {
    let s = mc_uncovered_stats(40, 30, 10, 2, 0.15, &[], &McConfig::new(500, 9)).unwrap();
    assert!(s.y.mean >= s.nowhere.mean);
    assert_eq!(s.histogram.iter().sum::<u64>(), 500);
}

#[test]
fn no_shuffle_fraction_rises_through_threshold() {
    let pth: f64 = p_threshold(60.0, 20.0).unwrap();
    let cfg = McConfig::new(300, 4);
    let lo = mc_no_shuffle_prob(60, 60, 20, 2, 0.3 * pth, &cfg).unwrap();
    let hi = mc_no_shuffle_prob(60, 60, 20, 2, 4.0 * pth, &cfg).unwrap();
    assert!(lo.estimate < 0.1 && hi.estimate > 0.9, "{} {}", lo.estimate, hi.estimate);
}

proptest! {
    #[test]
    fn outage_probability_is_monotone(m in 1u32..200, n in 1u32..100, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (m, n) = (m as f64, n as f64);
        let plo = p_miss_exact(m, n, lo).unwrap();
        let phi = p_miss_exact(m, n, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&plo));
        prop_assert!(phi <= plo + 1e-12);
    }

    #[test]
    fn threshold_is_a_probability(n in 1u32..10_000, k in 2u32..10_000) {
        let p: f64 = p_threshold(n as f64, k as f64).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        let q: f64 = p_outage(k as f64, n as f64).unwrap();
        prop_assert!(q > 0.0 && q <= 1.0);
    }
}
