#![allow(dead_code)]

pub mod strategies;

use privtest_core::enumerate::DatasetIter;
use privtest_core::rng::uniform;
use privtest_core::{Dataset, DiscreteDistribution, DpRng, PrivateTest};
use rand::Rng;

/// Random distribution on `k` atoms; each atom is zeroed with probability `zero`
/// (at least one atom keeps positive mass).
pub fn random_dist(rng: &mut DpRng, k: usize, zero: f64) -> DiscreteDistribution {
    loop {
        let w: Vec<f64> = (0..k)
            .map(|_| if uniform(rng) < zero { 0.0 } else { 0.02 + uniform(rng) })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return DiscreteDistribution::from_weights(w.into_iter().map(|v| v / s).collect()).unwrap();
        }
    }
}

/// Random pair that is not identical.
pub fn random_pair(rng: &mut DpRng, k: usize, zero: f64) -> (DiscreteDistribution, DiscreteDistribution) {
    loop {
        let p = random_dist(rng, k, zero);
        let q = random_dist(rng, k, zero);
        if p.weights() != q.weights() {
            return (p, q);
        }
    }
}

pub fn random_eps(rng: &mut DpRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + uniform(rng) * (hi.ln() - lo.ln())).exp()
}

pub fn random_k(rng: &mut DpRng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

/// `E_{D^n}[accept_prob]` by enumerating `X^n`.
pub fn expected_accept(test: &PrivateTest, d: &DiscreteDistribution, n: usize) -> f64 {
    DatasetIter::new(d.len(), n)
        .map(|x| {
            let x = Dataset::from(x);
            let w = d.log_prob(&x).exp();
            if w == 0.0 {
                0.0
            } else {
                w * test.accept_prob(&x)
            }
        })
        .sum()
}
