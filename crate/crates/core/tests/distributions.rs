mod common;

use common::strategies::{dist, pair};
use privtest_core::rng::seeded;
use privtest_core::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn hellinger_brackets_total_variation((p, q) in pair(2, 6)) {
        let h2 = hellinger_sq(&p, &q).unwrap();
        let tv = total_variation(&p, &q).unwrap();
        prop_assert!(h2 <= tv + 1e-12);
        prop_assert!(tv <= (h2 * (2.0 - h2)).sqrt() + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&h2));
    }

    #[test]
    fn hockey_stick_is_nonincreasing(
        (p, q) in pair(2, 6),
        mut alphas in prop::collection::vec(1.0f64..20.0, 2..8),
    ) {
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let values: Vec<f64> = alphas.iter().map(|&a| hockey_stick(&p, &q, a).unwrap()).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
        let tv = total_variation(&p, &q).unwrap();
        prop_assert!((hockey_stick(&p, &q, 1.0).unwrap() - tv).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative((p, q) in pair(2, 6)) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tensorization_is_monotone(h2 in 0.0f64..=1.0, n in 1u64..10_000) {
        let a = hellinger_tensorize(h2, n).unwrap();
        let b = hellinger_tensorize(h2, n + 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn product_tensorizes_hellinger((p, q) in pair(2, 3), n in 1usize..4) {
        let h2 = hellinger_sq(&p, &q).unwrap();
        let direct = hellinger_sq(&p.product(n), &q.product(n)).unwrap();
        prop_assert!((direct - hellinger_tensorize(h2, n as u64).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_on_the_support(p in dist(5), n in 0usize..200, seed in any::<u64>()) {
        let x = p.sample(n, &mut seeded(seed));
        prop_assert_eq!(x.len(), n);
        for &i in x.entries() {
            prop_assert!(p.weight(i) > 0.0);
        }
        prop_assert_eq!(x.counts(5).iter().sum::<u64>(), n as u64);
        let c = p.sample_counts(n as u64, &mut seeded(seed));
        prop_assert_eq!(c.iter().sum::<u64>(), n as u64);
    }

    #[test]
    fn json_round_trip(p in dist(4)) {
        let s = serde_json::to_string(&p).unwrap();
        let back: DiscreteDistribution = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn rejects_malformed_input() {
    assert!(matches!(
        DiscreteDistribution::from_weights(vec![0.5, 0.6]),
        Err(DistError::NotNormalized { .. })
    ));
    assert!(matches!(
        DiscreteDistribution::from_weights(vec![1.5, -0.5]),
        Err(DistError::NegativeWeight { index: 1, .. })
    ));
    let a = DiscreteDistribution::from_weights(vec![0.5, 0.5]).unwrap();
    let b = DiscreteDistribution::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
    assert!(total_variation(&a, &b).is_err());
}

#[test]
fn sample_frequencies_match_weights() {
    let p = DiscreteDistribution::from_weights(vec![0.1, 0.2, 0.7]).unwrap();
    let n = 200_000;
    let c = p.sample(n, &mut seeded(11)).counts(3);
    for (i, &w) in p.weights().iter().enumerate() {
        let f = c[i] as f64 / n as f64;
        let se = (w * (1.0 - w) / n as f64).sqrt();
        assert!((f - w).abs() < 5.0 * se, "atom {i}: {f} vs {w}");
    }
}
