mod common;

use common::strategies::{eps, pair};
use privtest_core::trim::{phi, EPS_PRIME_TOL};
use privtest_core::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn tau_is_nonincreasing_in_eps((p, q) in pair(2, 6), e in eps(), factor in 1.0f64..5.0) {
        let (a, _) = compute_tau(&p, &q, e).unwrap();
        let (b, _) = compute_tau(&p, &q, e * factor).unwrap();
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn eps_prime_is_the_largest_root((p, q) in pair(2, 6), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        prop_assert!(t.eps_prime >= 0.0 && t.eps_prime <= e);
        let (pw, qw) = (t.p.weights(), t.q.weights());
        if t.tau > 0.0 {
            prop_assert!((phi(pw, qw, t.eps_prime) - t.tau).abs() <= 2.0 * EPS_PRIME_TOL);
        }
        for i in 1..=200 {
            let y = t.eps_prime + EPS_PRIME_TOL + (e - t.eps_prime) * i as f64 / 200.0;
            if y <= e {
                prop_assert!(phi(pw, qw, y) < t.tau + 2.0 * EPS_PRIME_TOL);
            }
        }
    }

    #[test]
    fn swapping_inputs_keeps_tau_and_eps_prime((p, q) in pair(2, 6), e in eps()) {
        let a = trim_pair(&p, &q, e).unwrap();
        let b = trim_pair(&q, &p, e).unwrap();
        prop_assert!((a.tau - b.tau).abs() < 1e-15);
        prop_assert!((a.eps_prime - b.eps_prime).abs() < 1e-9);
        let (lo_a, hi_a) = a.caller_clamp_bounds();
        let (lo_b, hi_b) = b.caller_clamp_bounds();
        prop_assert!((lo_a + hi_b).abs() < 1e-9 && (hi_a + lo_b).abs() < 1e-9);
    }

    #[test]
    fn partition_and_masses((p, q) in pair(2, 6), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        let mut seen = vec![0u8; p.len()];
        for &i in t.set_s.iter().chain(&t.set_t).chain(&t.set_a) {
            seen[i] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert!((t.p_tilde.mass() - (1.0 - t.tau)).abs() < 1e-9);
        prop_assert!((t.q_tilde.mass() - (1.0 - t.tau)).abs() < 1e-9);
        let (cp, cq) = t.caller_pair();
        prop_assert_eq!(cp, &p);
        prop_assert_eq!(cq, &q);
    }

    #[test]
    fn residuals_have_disjoint_support((p, q) in pair(2, 6), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        if let (Some(a), Some(b)) = (&t.p_double, &t.q_double) {
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert!(*x == 0.0 || *y == 0.0);
            }
        }
    }

    #[test]
    fn areas_are_hockey_sticks((p, q) in pair(2, 6), e in eps()) {
        let t = trim_pair(&p, &q, e).unwrap();
        let blue = hockey_stick(&p, &q, e.exp()).unwrap();
        let red = hockey_stick(&q, &p, e.exp()).unwrap();
        prop_assert!((t.area_p_excess - blue).abs() < 1e-12);
        prop_assert!((t.area_q_excess - red).abs() < 1e-12);
        prop_assert!((t.tau - blue.max(red)).abs() < 1e-15);
    }
}

#[test]
fn three_point_mixture_identity() {
    let a: f64 = 0.04;
    let a32 = a.powf(1.5);
    let p = DiscreteDistribution::from_weights(vec![0.0, 0.5, 0.5]).unwrap();
    let q = DiscreteDistribution::from_weights(vec![2.0 * a32, 0.5 + a - a32, 0.5 - a - a32]).unwrap();
    let t = trim_pair(&p, &q, 0.05).unwrap();
    for (w, prime, double) in [(t.p.weights(), &t.p_prime, &t.p_double), (t.q.weights(), &t.q_prime, &t.q_double)] {
        for x in 0..3 {
            let v = (1.0 - t.tau) * prime.as_ref().unwrap().weight(x) + t.tau * double.as_ref().unwrap().weight(x);
            assert!((w[x] - v).abs() < 1e-9);
        }
    }
}

#[test]
fn rejects_bad_eps() {
    let p = DiscreteDistribution::bernoulli(0.3).unwrap();
    for e in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(trim_pair(&p, &p, e).is_err(), "{e}");
    }
}
