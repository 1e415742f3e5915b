mod common;

use common::expected_accept;
use common::strategies::{eps, pair};
use privtest_core::advantage::advantage_auto;
use privtest_core::rng::seeded;
use privtest_core::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_sums_match_full_enumeration((p, q) in pair(2, 3), e in eps(), n in 1u64..5) {
        let t = trim_pair(&p, &q, e).unwrap();
        for test in [PrivateTest::sllr(&p, &q).unwrap(), PrivateTest::scllr(&t), PrivateTest::ncllr(&t)] {
            let fast = advantage_exact(&test, &p, &q, n).unwrap().value;
            let slow = expected_accept(&test, &p, n as usize) - expected_accept(&test, &q, n as usize);
            prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn one_sample_closed_form((p, q) in pair(2, 6), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        let exact = advantage_exact(&PrivateTest::scllr(&t), &p, &q, 1).unwrap().value;
        prop_assert!((scllr_advantage_closed_form(&t).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn advantage_is_nondecreasing_in_n((p, q) in pair(2, 4), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        for test in [PrivateTest::scllr(&t), PrivateTest::ncllr(&t), PrivateTest::sllr(&p, &q).unwrap()] {
            let mut last = f64::NEG_INFINITY;
            for n in 1..=24u64 {
                let a = advantage_exact(&test, &p, &q, n).unwrap().value;
                prop_assert!(a >= last - 1e-12, "{:?} n={n}: {a} < {last}", test.kind());
                last = a;
            }
        }
    }

    #[test]
    fn theoretical_sc_is_inverse_one_sample_advantage_up_to_constants((p, q) in pair(2, 5), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        if let Ok(sc) = theoretical_sc(&t) {
            let adv1 = advantage_exact(&PrivateTest::scllr(&t), &p, &q, 1).unwrap().value;
            let r = sc * adv1;
            prop_assert!(r > 1.0 / 16.0 && r < 16.0, "{r}");
        }
    }
}

#[test]
fn monte_carlo_interval_covers_the_exact_value() {
    let p = DiscreteDistribution::from_weights(vec![0.45, 0.35, 0.2]).unwrap();
    let q = DiscreteDistribution::from_weights(vec![0.3, 0.3, 0.4]).unwrap();
    let t = trim_pair(&p, &q, 0.3).unwrap();
    let test = PrivateTest::ncllr(&t);
    let mut rng = seeded(8);
    for n in [5u64, 40, 300] {
        let exact = advantage_exact(&test, &p, &q, n).unwrap().value;
        let mc = advantage_mc(&test, &p, &q, n, 20_000, &mut rng).unwrap();
        assert!(mc.ci_low <= exact && exact <= mc.ci_high, "n={n}: {exact} not in {mc:?}");
        assert_eq!(mc.method, AdvantageMethod::MonteCarlo);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let p = DiscreteDistribution::bernoulli(0.6).unwrap();
    let q = DiscreteDistribution::bernoulli(0.4).unwrap();
    let test = PrivateTest::sllr(&p, &q).unwrap();
    let a = advantage_mc(&test, &p, &q, 100, 10_000, &mut seeded(3)).unwrap();
    let b = advantage_mc(&test, &p, &q, 100, 10_000, &mut seeded(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn auto_switches_to_monte_carlo_past_the_budget() {
    let p = DiscreteDistribution::from_weights(vec![0.25; 4]).unwrap();
    let q = DiscreteDistribution::from_weights(vec![0.4, 0.2, 0.2, 0.2]).unwrap();
    let test = PrivateTest::sllr(&p, &q).unwrap();
    let small = advantage_auto(&test, &p, &q, 50, 1000, &mut seeded(1)).unwrap();
    assert_eq!(small.method, AdvantageMethod::ExactEnum);
    let big = advantage_auto(&test, &p, &q, 5000, 1000, &mut seeded(1)).unwrap();
    assert_eq!(big.method, AdvantageMethod::MonteCarlo);
}

#[test]
fn search_brackets_the_exact_crossing() {
    let p = DiscreteDistribution::bernoulli(0.7).unwrap();
    let q = DiscreteDistribution::bernoulli(0.3).unwrap();
    let t = trim_pair(&p, &q, 0.2).unwrap();
    let test = PrivateTest::scllr(&t);
    let r = sample_complexity_search(&test, &p, &q, 2.0 / 3.0, SearchBudget::default(), &mut seeded(0)).unwrap();
    assert!(r.resolved);
    let at = |n| advantage_exact(&test, &p, &q, n).unwrap().value;
    assert!(at(r.n_star) >= 2.0 / 3.0);
    assert!(at(r.n_star - 1) < 2.0 / 3.0);
}
