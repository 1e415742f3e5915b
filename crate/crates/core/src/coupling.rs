//! Couplings of `P^n` and `Q^n`, transport under the truncated Hamming cost
//! `d_eps(x, y) = min(eps * d_H(x, y), 1)`, and the test built from a
//! transport potential.

use rand::Rng;
use serde::Serialize;

use crate::dist::{Dataset, DiscreteDistribution, Sampler};
use crate::enumerate::{dataset_count, encode, DatasetIter};
use crate::error::{Error, Result};
use crate::flow::{scale_masses, solve_transport};
use crate::hypothesis::PrivateTest;
use crate::rng::uniform;
use crate::trim::{Orientation, TrimmedPair};

/// Largest dataset space `|X|^n` handed to the transport solver.
pub const WASSERSTEIN_BUDGET: u64 = 200;

/// Common denominator for the integer transport problem.
pub const TRANSPORT_SCALE: i64 = 1_000_000_000;

/// Proposal cap for the residual part of the block coupling.
pub const MAX_RESIDUAL_PROPOSALS: u64 = 1_000_000;

/// Slack on the neighbour Lipschitz check of a potential.
pub const LIPSCHITZ_TOL: f64 = 1e-9;

/// `min(eps * hamming, 1)`.
pub fn truncated_hamming(eps: f64, hamming: usize) -> f64 {
    (eps * hamming as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLabel {
    /// Coupled through the block of trimmed points.
    One,
    /// Drawn from the excess of `P` and resampled from the excess of `Q`.
    Two,
}

/// One paired draw `(x, y)`.
///
/// `x ~ P^n` and `y ~ Q^n` in the oriented frame of the trimmed pair; use
/// [`CouplingTranscript::caller_frame`] for the caller's order.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingTranscript {
    pub x: Dataset,
    pub y: Dataset,
    pub labels: Vec<PointLabel>,
    pub hamming: usize,
    pub cost: f64,
    pub orientation: Orientation,
}

impl CouplingTranscript {
    /// `(x, y)` with `x` drawn from the caller's `P^n`.
    pub fn caller_frame(&self) -> (&Dataset, &Dataset) {
        match self.orientation {
            Orientation::PSide => (&self.x, &self.y),
            Orientation::QSide => (&self.y, &self.x),
        }
    }
}

/// Draw one pair from the coupling of `P^n` and `Q^n` built on the trimmed pair.
///
/// Each `x_i ~ P`. A point of `S` is labelled `Two` with probability
/// `1 - e^eps Q(x_i)/P(x_i)`, every other point `One`; so `Two` has overall
/// probability `tau`, and conditionally `x_i ~ P''` or `x_i ~ P'`. `Two`
/// points get `y_i ~ Q''`. The `One` block is passed through the maximal
/// coupling of `P'^m` and `Q'^m`, sampled exactly: keep `y = x` with
/// probability `min(1, Q'^m(x)/P'^m(x))`, otherwise draw `y` from the normalized
/// residual `(Q'^m - P'^m)_+` by rejection from `Q'^m`.
pub fn sample_coupling<R: Rng + ?Sized>(trimmed: &TrimmedPair, n: usize, rng: &mut R) -> Result<CouplingTranscript> {
    let pw = trimmed.p.weights();
    let qw = trimmed.q.weights();
    let e = trimmed.eps.exp();
    let k = pw.len();
    let in_s = {
        let mut m = vec![false; k];
        trimmed.set_s.iter().for_each(|&i| m[i] = true);
        m
    };
    let p_sampler = Sampler::new(pw);
    let primes = trimmed.p_prime.as_ref().zip(trimmed.q_prime.as_ref());
    // residual draws fall back to Q' only in the tau ~ 0 corner where Q'' is not formed
    let q_two = match (&trimmed.q_double, &trimmed.q_prime) {
        (Some(d), _) => Sampler::new(d.weights()),
        (None, Some(qp)) => Sampler::new(qp.weights()),
        (None, None) => unreachable!("a trimmed pair always has Q' or Q''"),
    };

    let mut x = Vec::with_capacity(n);
    let mut y = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut block = Vec::new();
    for i in 0..n {
        let xi = p_sampler.draw(rng);
        x.push(xi);
        let one = primes.is_some() && (!in_s[xi] || uniform(rng) * pw[xi] < e * qw[xi]);
        if one {
            labels.push(PointLabel::One);
            block.push(i);
        } else {
            labels.push(PointLabel::Two);
            y[i] = q_two.draw(rng);
        }
    }

    if let Some((pp, qp)) = primes {
        let (pp, qp) = (pp.weights(), qp.weights());
        let lr_qp: Vec<f64> = pp.iter().zip(qp).map(|(a, b)| (b / a).ln()).collect();
        let l: f64 = block.iter().map(|&i| lr_qp[x[i]]).sum();
        if !block.is_empty() && uniform(rng) >= l.min(0.0).exp() {
            let q_sampler = Sampler::new(qp);
            let mut proposal = vec![0usize; block.len()];
            let mut accepted = false;
            for _ in 0..MAX_RESIDUAL_PROPOSALS {
                let mut lp = 0.0;
                for slot in proposal.iter_mut() {
                    *slot = q_sampler.draw(rng);
                    lp -= lr_qp[*slot];
                }
                // accept with probability (1 - P'^m / Q'^m)_+
                if uniform(rng) < 1.0 - lp.min(0.0).exp() {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::CouplingRejection(MAX_RESIDUAL_PROPOSALS));
            }
            for (&i, &v) in block.iter().zip(&proposal) {
                y[i] = v;
            }
        } else {
            for &i in &block {
                y[i] = x[i];
            }
        }
    }

    let hamming = x.iter().zip(&y).filter(|(a, b)| a != b).count();
    Ok(CouplingTranscript {
        x: Dataset::from(x),
        y: Dataset::from(y),
        labels,
        hamming,
        cost: truncated_hamming(trimmed.eps, hamming),
        orientation: trimmed.orientation,
    })
}

/// `eps tau n + sqrt((1 - tau) n) H(P', Q')`.
///
/// This is the expression as usually stated; it omits the `sqrt 2` in
/// `TV(P^m, Q^m) <= sqrt(2 m) H(P, Q)` and can undercut the true expected
/// cost when `eps tau n` is small. [`coupling_cost_bound_sqrt2`] carries the factor.
pub fn coupling_cost_bound(trimmed: &TrimmedPair, n: u64) -> Result<f64> {
    let h2 = trimmed.hellinger_sq_prime().ok_or(Error::UndefinedPrime)?;
    let nf = n as f64;
    Ok(trimmed.eps * trimmed.tau * nf + ((1.0 - trimmed.tau) * nf).sqrt() * h2.sqrt())
}

/// `eps tau n + sqrt(2 (1 - tau) n) H(P', Q')`, a valid bound on the expected coupling cost.
pub fn coupling_cost_bound_sqrt2(trimmed: &TrimmedPair, n: u64) -> Result<f64> {
    let h2 = trimmed.hellinger_sq_prime().ok_or(Error::UndefinedPrime)?;
    let nf = n as f64;
    Ok(trimmed.eps * trimmed.tau * nf + (2.0 * (1.0 - trimmed.tau) * nf * h2).sqrt())
}

/// A real-valued function on `X^n`, stored by dataset code.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialFunction {
    support_size: usize,
    n: usize,
    values: Vec<f64>,
}

impl PotentialFunction {
    pub fn new(support_size: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let expected = dataset_count(support_size, n)
            .filter(|&c| c <= usize::MAX as u64)
            .ok_or_else(|| Error::InvalidParameter("dataset space too large".into()))?;
        if values.len() as u64 != expected {
            return Err(Error::InvalidParameter(format!(
                "{} values for a space of {expected} datasets",
                values.len()
            )));
        }
        Ok(Self { support_size, n, values })
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: &Dataset) -> f64 {
        self.values[encode(x.entries(), self.support_size)]
    }

    /// `(1 + f(x)) / 4`.
    pub fn accept_prob(&self, x: &Dataset) -> f64 {
        0.25 * (1.0 + self.value(x))
    }

    /// Shift so that the minimum value is zero.
    pub fn normalized(mut self) -> Self {
        let m = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            self.values.iter_mut().for_each(|v| *v -= m);
        }
        self
    }

    /// `E_{D^n}[f]`.
    pub fn expectation(&self, d: &DiscreteDistribution) -> f64 {
        DatasetIter::new(self.support_size, self.n)
            .zip(&self.values)
            .map(|(x, v)| d.log_prob(&Dataset::from(x)).exp() * v)
            .sum()
    }

    /// Check `0 <= f <= 2` and `|f(x) - f(x')| <= min(eps, 1)` on neighbours.
    pub fn check(&self, eps: f64) -> Result<()> {
        for &v in &self.values {
            if !(-1e-12..=2.0 + 1e-12).contains(&v) {
                return Err(Error::RangeViolation { value: v });
            }
        }
        let limit = eps.min(1.0);
        let k = self.support_size;
        let mut weights = vec![1usize; self.n];
        for i in (0..self.n.saturating_sub(1)).rev() {
            weights[i] = weights[i + 1] * k;
        }
        for code in 0..self.values.len() {
            for (pos, &w) in weights.iter().enumerate() {
                let d = (code / w) % k;
                for v in d + 1..k {
                    let other = code + (v - d) * w;
                    let diff = (self.values[code] - self.values[other]).abs();
                    if diff > limit + LIPSCHITZ_TOL {
                        let x = crate::enumerate::decode(code, k, self.n);
                        let mut y = x.clone();
                        y[pos] = v;
                        return Err(Error::NotLipschitz { diff, limit, x, y });
                    }
                }
            }
        }
        Ok(())
    }
}

/// The test that answers `"P"` with probability `(1 + f(x)) / 4`.
///
/// Neighbouring acceptance (and rejection) probabilities differ by a factor
/// of at most `1 + min(eps, 1) <= e^eps`, so the test claims `eps`.
pub fn potential_test(f: PotentialFunction, eps: f64) -> Result<PrivateTest> {
    f.check(eps)?;
    Ok(PrivateTest::from_potential(f, eps))
}

/// Optimal transport between `P^n` and `Q^n` under `d_eps`.
#[derive(Debug, Clone, Serialize)]
pub struct TransportSolution {
    pub value: f64,
    /// 1-Lipschitz potential with `E_P f - E_Q f = value`, shifted to minimum 0.
    pub potential: PotentialFunction,
    /// True when the supports are disjoint and no flow problem was solved.
    pub disjoint_shortcut: bool,
}

/// Exact `W_{d_eps}(P^n, Q^n)` with an optimal dual potential.
pub fn wasserstein_exact(p: &DiscreteDistribution, q: &DiscreteDistribution, n: usize, eps: f64) -> Result<TransportSolution> {
    p.check_same_support(q)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let k = p.len();
    let size = dataset_count(k, n).unwrap_or(u64::MAX);
    if size > WASSERSTEIN_BUDGET {
        return Err(Error::EnumerationBudget { what: "datasets", needed: size as f64, budget: WASSERSTEIN_BUDGET as f64 });
    }
    let datasets: Vec<Vec<usize>> = DatasetIter::new(k, n).collect();
    let (pw, qw) = (p.weights(), q.weights());

    let disjoint = n > 0 && pw.iter().zip(qw).all(|(a, b)| *a == 0.0 || *b == 0.0);
    if disjoint {
        let values = datasets
            .iter()
            .map(|x| truncated_hamming(eps, x.iter().filter(|&&i| pw[i] > 0.0).count()))
            .collect();
        return Ok(TransportSolution {
            value: truncated_hamming(eps, n),
            potential: PotentialFunction::new(k, n, values)?.normalized(),
            disjoint_shortcut: true,
        });
    }

    let mass = |w: &[f64]| -> Vec<f64> {
        datasets
            .iter()
            .map(|x| x.iter().map(|&i| w[i]).product::<f64>())
            .collect()
    };
    let supply = scale_masses(&mass(pw), TRANSPORT_SCALE);
    let demand = scale_masses(&mass(qw), TRANSPORT_SCALE);
    let cost: Vec<Vec<f64>> = datasets
        .iter()
        .map(|x| {
            datasets
                .iter()
                .map(|y| truncated_hamming(eps, x.iter().zip(y).filter(|(a, b)| a != b).count()))
                .collect()
        })
        .collect();
    let plan = solve_transport(&supply, &demand, &cost);
    let value = plan.cost / TRANSPORT_SCALE as f64;
    // c-transform of the column potentials: f(x) = min_y c(x, y) - v(y)
    let values: Vec<f64> = cost
        .iter()
        .map(|row| row.iter().zip(&plan.v).map(|(c, v)| c - v).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(TransportSolution {
        value,
        potential: PotentialFunction::new(k, n, values)?.normalized(),
        disjoint_shortcut: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advantage::advantage_exact;
    use crate::dist::total_variation;
    use crate::rng::seeded;
    use crate::trim::trim_pair;

    fn ber(p: f64) -> DiscreteDistribution {
        DiscreteDistribution::bernoulli(p).unwrap()
    }

    #[test]
    fn identical_pair_couples_to_itself() {
        let p = DiscreteDistribution::from_weights(vec![0.3, 0.3, 0.4]).unwrap();
        let t = trim_pair(&p, &p, 0.5).unwrap();
        let mut rng = seeded(1);
        for _ in 0..50 {
            let c = sample_coupling(&t, 12, &mut rng).unwrap();
            assert_eq!(c.x, c.y);
            assert_eq!(c.hamming, 0);
            assert_eq!(c.cost, 0.0);
        }
        assert_eq!(coupling_cost_bound(&t, 12).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_pair_moves_every_point() {
        let t = trim_pair(&ber(1.0), &ber(0.0), 0.2).unwrap();
        let mut rng = seeded(2);
        for n in [5usize, 10, 40] {
            let c = sample_coupling(&t, n, &mut rng).unwrap();
            assert_eq!(c.hamming, n);
            assert_eq!(c.cost, truncated_hamming(0.2, n));
            assert!(c.labels.iter().all(|&l| l == PointLabel::Two));
        }
        assert!(matches!(coupling_cost_bound(&t, 3), Err(Error::UndefinedPrime)));
    }

    #[test]
    fn labels_respect_the_partition() {
        let p = DiscreteDistribution::from_weights(vec![0.6, 0.3, 0.1]).unwrap();
        let q = DiscreteDistribution::from_weights(vec![0.1, 0.3, 0.6]).unwrap();
        let t = trim_pair(&p, &q, 0.4).unwrap();
        let mut rng = seeded(3);
        for _ in 0..200 {
            let c = sample_coupling(&t, 8, &mut rng).unwrap();
            for (i, l) in c.labels.iter().enumerate() {
                if *l == PointLabel::Two {
                    assert!(t.set_s.contains(&c.x.entries()[i]));
                    assert!(t.set_t.contains(&c.y.entries()[i]));
                }
            }
        }
    }

    #[test]
    fn tau_zero_bound_is_root_n_hellinger() {
        let (p, q) = (ber(0.6), ber(0.4));
        let t = trim_pair(&p, &q, 2.0).unwrap();
        assert_eq!(t.tau, 0.0);
        let h = crate::dist::hellinger_sq(&p, &q).unwrap().sqrt();
        assert!((coupling_cost_bound(&t, 9).unwrap() - 3.0 * h).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_examples() {
        let p = DiscreteDistribution::from_weights(vec![0.2, 0.5, 0.3]).unwrap();
        assert!(wasserstein_exact(&p, &p, 2, 0.7).unwrap().value.abs() < 1e-9);

        let w = wasserstein_exact(&ber(1.0), &ber(0.0), 1, 0.5).unwrap();
        assert_eq!(w.value, 0.5);
        assert!(w.disjoint_shortcut);

        let (a, b) = (ber(0.75), ber(0.25));
        let w = wasserstein_exact(&a, &b, 2, 10.0).unwrap();
        let tv = total_variation(&a.product(2), &b.product(2)).unwrap();
        assert!((w.value - tv).abs() < 1e-8, "{} vs {tv}", w.value);

        assert!(matches!(
            wasserstein_exact(&p, &p, 5, 1.0),
            Err(Error::EnumerationBudget { .. })
        ));
    }

    #[test]
    fn dual_potential_realizes_the_transport_cost() {
        let p = DiscreteDistribution::from_weights(vec![0.5, 0.3, 0.2]).unwrap();
        let q = DiscreteDistribution::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        for (n, eps) in [(1usize, 0.3), (2, 0.3), (3, 0.2), (4, 1.5)] {
            let w = wasserstein_exact(&p, &q, n, eps).unwrap();
            let f = w.potential.clone();
            let gap = f.expectation(&p) - f.expectation(&q);
            assert!((gap - w.value).abs() < 1e-6, "n={n}: {gap} vs {}", w.value);
            let test = potential_test(f, eps).unwrap();
            let adv = advantage_exact(&test, &p, &q, n as u64).unwrap().value;
            assert!((adv - w.value / 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn potential_guards() {
        let zero = PotentialFunction::new(2, 2, vec![0.0; 4]).unwrap();
        let t = potential_test(zero, 0.5).unwrap();
        assert_eq!(t.accept_prob(&Dataset::from(vec![0, 1])), 0.25);
        let steep = PotentialFunction::new(2, 1, vec![0.0, 0.9]).unwrap();
        assert!(matches!(potential_test(steep, 0.5), Err(Error::NotLipschitz { .. })));
        let big = PotentialFunction::new(2, 1, vec![0.0, 2.5]).unwrap();
        assert!(matches!(potential_test(big, 5.0), Err(Error::RangeViolation { .. })));
    }
}
