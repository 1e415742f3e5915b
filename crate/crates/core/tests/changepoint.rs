use privtest_core::changepoint::{gof_cpd, planted_stream, BlockDetector, NcllrTester};
use privtest_core::enumerate::DatasetIter;
use privtest_core::rng::{seeded, uniform};
use privtest_core::*;
use proptest::prelude::*;
use rand::RngCore;

fn pm1() -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..60)
}

proptest! {
    #[test]
    fn prepending_plus_ones_shifts_the_estimate(z in pm1(), m in 1usize..20) {
        let base = bernoulli_cpd_offline(&z).unwrap();
        let mut longer = vec![1i8; m];
        longer.extend_from_slice(&z);
        let shifted = bernoulli_cpd_offline(&longer).unwrap();
        if base.k_hat > 1 {
            prop_assert_eq!(shifted.k_hat, base.k_hat + m);
        }
    }

    #[test]
    fn deterministic_signal_is_recovered_exactly(k in 0usize..50, extra in 1usize..50) {
        let z: Vec<i8> = (0..k + extra).map(|j| if j < k { 1 } else { -1 }).collect();
        prop_assert_eq!(bernoulli_cpd_offline(&z).unwrap().k_hat, k + 1);
    }

    #[test]
    fn argmin_matches_brute_force(z in pm1()) {
        let suffix = |t: usize| z[t - 1..].iter().map(|&v| v as i64).sum::<i64>();
        let best = (1..=z.len()).map(suffix).min().unwrap();
        let first = (1..=z.len()).find(|&t| suffix(t) == best).unwrap();
        let r = bernoulli_cpd_offline(&z).unwrap();
        prop_assert_eq!(r.k_hat, first);
        prop_assert_eq!(r.min_suffix, best);
    }

    #[test]
    fn estimate_is_a_block_multiple(seed in any::<u64>(), b in 1usize..12, k in 0usize..200) {
        let p = DiscreteDistribution::bernoulli(0.8).unwrap();
        let q = DiscreteDistribution::bernoulli(0.3).unwrap();
        let det = BlockDetector::with_block_size(&p, &q, 0.5, b).unwrap();
        let mut rng = seeded(seed);
        let data = planted_stream(&p, &q, k, 200.max(2 * b), &mut rng);
        let r = offline_cpd(&det, &data, 0.1, &mut rng).unwrap();
        prop_assert_eq!(r.k_hat % b, 0);
        prop_assert!(r.k_hat < data.len());
        prop_assert_eq!(r.z_sequence.len(), data.len() / b);
    }
}

/// Exact output law of the two-block pipeline: `Pr[k_hat = 0]` and `Pr[k_hat = B]`.
fn two_block_law(test: &PrivateTest, x: &[usize], b: usize) -> [f64; 2] {
    let a1 = test.accept_prob(&Dataset::from(x[..b].to_vec()));
    let a2 = test.accept_prob(&Dataset::from(x[b..].to_vec()));
    let mut out = [0.0; 2];
    for (z1, w1) in [(1i8, a1), (-1, 1.0 - a1)] {
        for (z2, w2) in [(1i8, a2), (-1, 1.0 - a2)] {
            let j = bernoulli_cpd_offline(&[z1, z2]).unwrap().k_hat;
            out[j - 1] += w1 * w2;
        }
    }
    out
}

#[test]
fn two_block_pipeline_is_private() {
    let p = DiscreteDistribution::from_weights(vec![0.6, 0.3, 0.1]).unwrap();
    let q = DiscreteDistribution::from_weights(vec![0.1, 0.3, 0.6]).unwrap();
    let eps = 0.4;
    let b = 2;
    let test = PrivateTest::ncllr(&trim_pair(&p, &q, eps).unwrap());
    let all: Vec<Vec<usize>> = DatasetIter::new(3, 2 * b).collect();
    let mut worst = 0.0f64;
    for x in &all {
        let lx = two_block_law(&test, x, b);
        for pos in 0..2 * b {
            for v in 0..3 {
                let mut y = x.clone();
                y[pos] = v;
                let ly = two_block_law(&test, &y, b);
                for i in 0..2 {
                    worst = worst.max((lx[i] / ly[i]).ln().abs());
                }
            }
        }
    }
    assert!(worst <= eps + 1e-9, "{worst}");
}

#[test]
fn online_false_trigger_rate_is_below_the_binomial_tail() {
    // z = +1 with probability 0.9; one interval of n bits triggers on a strict majority of -1
    let mut rng = seeded(21);
    for n in [20usize, 40] {
        let tail: f64 = (n / 2 + 1..=n)
            .map(|k| {
                let ln_choose = (1..=n).map(|i| (i as f64).ln()).sum::<f64>()
                    - (1..=k).map(|i| (i as f64).ln()).sum::<f64>()
                    - (1..=n - k).map(|i| (i as f64).ln()).sum::<f64>();
                (ln_choose + k as f64 * 0.1f64.ln() + (n - k) as f64 * 0.9f64.ln()).exp()
            })
            .sum();
        let intervals = 200_000;
        let mut triggers = 0u64;
        for _ in 0..intervals {
            let minus = (0..n).filter(|_| uniform(&mut rng) < 0.1).count();
            if 2 * minus > n {
                triggers += 1;
            }
        }
        let rate = triggers as f64 / intervals as f64;
        assert!(rate <= tail + 4.0 * (tail / intervals as f64).sqrt() + 1e-12, "n={n}: {rate} vs {tail}");
    }
}

#[test]
fn online_detector_triggers_soon_after_the_change() {
    let p = DiscreteDistribution::bernoulli(1.0).unwrap();
    let q = DiscreteDistribution::bernoulli(0.0).unwrap();
    let det = BlockDetector::new(&p, &q, 0.5, SearchBudget::default(), &mut seeded(0)).unwrap();
    let b = det.block_size;
    let n = 10;
    let k_star = 37 * b;
    let mut rng = seeded(31);
    let mut good = 0;
    for _ in 0..200 {
        let data = planted_stream(&p, &q, k_star, k_star + 100 * n * b, &mut rng);
        let r = online_cpd(&det, data.entries().to_vec(), n, 0.1, &mut rng).unwrap();
        let seen = r.observed_samples.unwrap() as usize;
        assert_eq!(seen, r.observed.unwrap() as usize * b);
        if seen <= k_star + 2 * n * b && r.k_hat.abs_diff(k_star) <= 2 * b {
            good += 1;
        }
    }
    assert!(good >= 180, "{good}");
}

#[test]
fn online_detector_runs_out_without_a_change() {
    let p = DiscreteDistribution::bernoulli(1.0).unwrap();
    let q = DiscreteDistribution::bernoulli(0.0).unwrap();
    let det = BlockDetector::with_block_size(&p, &q, 0.5, 12).unwrap();
    let mut rng = seeded(2);
    let data = planted_stream(&p, &q, 5000, 5000, &mut rng);
    let r = online_cpd(&det, data.entries().to_vec(), 10, 0.1, &mut rng);
    assert!(matches!(r, Err(Error::StreamExhausted { .. })));
}

#[test]
fn no_signal_is_flagged_not_fatal() {
    let p = DiscreteDistribution::bernoulli(0.5).unwrap();
    let det = BlockDetector::with_block_size(&p, &p, 0.5, 8).unwrap();
    let mut rng = seeded(3);
    let data = planted_stream(&p, &p, 100, 200, &mut rng);
    let r = offline_cpd(&det, &data, 0.1, &mut rng).unwrap();
    assert_eq!(r.k_hat % 8, 0);
}

/// Knows `P` and `Q`; answers by the sign of the block LLR and then flips the answer
/// with probability `1 - success`.
struct StubTester {
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    block: usize,
    success: f64,
}

impl GofTester for StubTester {
    fn block_size(&self) -> usize {
        self.block
    }

    fn test_block(&self, block: &[usize], rng: &mut dyn RngCore) -> i8 {
        let x = Dataset::from(block.to_vec());
        let truth = if self.p.log_prob(&x) >= self.q.log_prob(&x) { 1 } else { -1 };
        if uniform(rng) < self.success {
            truth
        } else {
            -truth
        }
    }
}

#[test]
fn gof_with_a_stub_tester_stays_in_band() {
    let p = DiscreteDistribution::from_weights(vec![0.1; 10]).unwrap();
    let mut w = vec![0.1; 10];
    w[0] += 0.3;
    for v in w.iter_mut().skip(1) {
        *v -= 0.3 / 9.0;
    }
    let q = p.with_weights(w).unwrap();
    assert!((total_variation(&p, &q).unwrap() - 0.3).abs() < 1e-12);
    let stub = StubTester { p: p.clone(), q: q.clone(), block: 60, success: 0.8 };
    let b = stub.block;
    let k_star = 10 * b;
    let mut rng = seeded(41);
    let mut errors = Vec::new();
    for _ in 0..200 {
        let data = planted_stream(&p, &q, k_star, 2 * k_star, &mut rng);
        let r = gof_cpd(&p, 0.3, &data, 0.1, &stub, Some(&q), 200, &mut rng).unwrap();
        errors.push(r.k_hat.abs_diff(k_star));
    }
    errors.sort();
    // success 0.8 per block: the error is a few blocks at most in 90% of runs
    assert!(errors[179] <= 6 * b, "{:?}", &errors[170..]);
}

#[test]
fn gof_with_ncllr_reduces_to_offline() {
    let p = DiscreteDistribution::bernoulli(0.9).unwrap();
    let q = DiscreteDistribution::bernoulli(0.1).unwrap();
    let det = BlockDetector::new(&p, &q, 0.5, SearchBudget::default(), &mut seeded(0)).unwrap();
    let data = planted_stream(&p, &q, 10 * det.block_size, 20 * det.block_size, &mut seeded(1));
    let a = offline_cpd(&det, &data, 0.1, &mut seeded(7)).unwrap();
    let tester = NcllrTester(det.clone());
    let b = gof_cpd(&p, 0.8, &data, 0.1, &tester, Some(&q), 0, &mut seeded(7)).unwrap();
    assert_eq!(a, b);
}
