mod common;

use bifrac::counterexample::{family_dist, lower_bound_chain, violation_exact, CounterFamily};
use bifrac::inequality::gap_exact;
use common::rng;
use rand::Rng;

fn random_family(r: &mut impl Rng, alpha_lo: f64, alpha_hi: f64) -> CounterFamily {
    let alpha = r.random_range(alpha_lo..alpha_hi);
    let c: f64 = r.random_range(0.05..3.0);
    let m = c.max(1.0) * (1.0 + r.random_range(0.001..1.0) * 10f64.powf(r.random_range(0.0..3.0)));
    CounterFamily::new(alpha, c, m).unwrap()
}

#[test]
fn closed_form_matches_double_sum() {
    let mut r = rng(51);
    for _ in 0..500 {
        let f = random_family(&mut r, 2.01, 8.0);
        let double = -gap_exact(&family_dist(&f).unwrap(), f.alpha()).unwrap().gap;
        assert!(
            (violation_exact(&f) - double).abs() <= 1e-10 * f.moment_scale(),
            "{f:?}: {} vs {double}",
            violation_exact(&f)
        );
    }
}

#[test]
fn bound_chain_holds() {
    let mut r = rng(52);
    for _ in 0..500 {
        let f = random_family(&mut r, 2.01, 8.0);
        let chain = lower_bound_chain(&f).unwrap();
        let scale = f.moment_scale();
        assert!(chain.exact >= chain.bound1 - 1e-10 * scale);
        assert!((chain.bound1 - chain.bound2).abs() <= 1e-12 * scale);
    }
}

#[test]
fn family_never_violates_for_alpha_at_most_two() {
    let mut r = rng(53);
    for _ in 0..500 {
        let f = random_family(&mut r, 0.05, 2.0);
        assert!(violation_exact(&f) <= 1e-12 * f.moment_scale(), "{f:?}");
        let g = gap_exact(&family_dist(&f).unwrap(), f.alpha()).unwrap();
        assert!(g.gap >= -1e-12 * g.scale().unwrap());
    }
    for m in [1.5, 10.0, 1e3, 1e5] {
        let f = CounterFamily::new(2.0, 0.5, m).unwrap();
        assert!(violation_exact(&f) <= 1e-12 * f.moment_scale());
    }
}

#[test]
fn large_m_uses_series_bracket_accurately() {
    // (M+1)^α − (M−1)^α cancels badly at M = 1e6; the series form must still
    // agree with the double sum, whose terms do not cancel in the same way
    for alpha in [2.3, 3.0, 4.5] {
        let f = CounterFamily::new(alpha, 0.5, 1e6).unwrap();
        let double = -gap_exact(&family_dist(&f).unwrap(), alpha).unwrap().gap;
        assert!((violation_exact(&f) - double).abs() <= 1e-10 * f.moment_scale());
    }
}
