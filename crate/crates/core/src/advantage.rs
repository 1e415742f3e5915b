//! Advantage `Pr_{P^n}[K = "P"] - Pr_{Q^n}[K = "P"]` of a test, exactly or by
//! Monte Carlo, and the search for the smallest `n` reaching a target.
//!
//! Exact evaluation of a count-based test sums over type classes (count
//! vectors) with multinomial weights, so its cost is the number of
//! compositions of `n` into `|X|` parts rather than `|X|^n`. Tests that are not
//! count based are summed over all of `X^n`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{multinomial, DiscreteDistribution, Sampler};
use crate::enumerate::{
    composition_count, dataset_count, for_each_composition, ln_factorials, ln_multinomial, ln_prob_counts, DatasetIter,
};
use crate::error::{Error, Result};
use crate::hypothesis::PrivateTest;
use crate::rng::{fork_seed, split};
use crate::trim::TrimmedPair;

/// Largest number of configurations the exact method will sum over.
pub const EXACT_BUDGET: f64 = 1e6;

/// Each of the two means gets a two-sided Hoeffding interval at this level,
/// so the difference is covered with probability at least 99%.
pub const CI_DELTA_PER_MEAN: f64 = 0.005;

/// Trials per parallel chunk; each chunk owns one generator stream.
const CHUNK: u64 = 4096;

/// Multiplier applied to `(1 - tau) H^2(P', Q')` in the closed form for the
/// one-sample scLLR advantage. Determined by matching exact enumeration.
pub const CLOSED_FORM_HELLINGER_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvantageMethod {
    ExactEnum,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvantageEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: AdvantageMethod,
    pub n: u64,
    pub trials: u64,
}

/// Number of terms the exact method needs for `test` at sample size `n`.
pub fn exact_cost(test: &PrivateTest, n: u64) -> f64 {
    let k = test.support_size();
    if test.is_symmetric() {
        composition_count(n, k)
    } else {
        usize::try_from(n)
            .ok()
            .and_then(|n| dataset_count(k, n))
            .map(|c| c as f64)
            .unwrap_or(f64::INFINITY)
    }
}

fn check_inputs(test: &PrivateTest, p: &DiscreteDistribution, q: &DiscreteDistribution, n: u64) -> Result<()> {
    p.check_same_support(q)?;
    if p.len() != test.support_size() {
        return Err(Error::InvalidParameter(format!(
            "test is defined on {} points, distributions on {}",
            test.support_size(),
            p.len()
        )));
    }
    if let Some(len) = test.fixed_length() {
        if len as u64 != n {
            return Err(Error::InvalidParameter(format!("test is defined on datasets of length {len}, not {n}")));
        }
    }
    Ok(())
}

/// Exact advantage by summation over type classes (or datasets).
pub fn advantage_exact(test: &PrivateTest, p: &DiscreteDistribution, q: &DiscreteDistribution, n: u64) -> Result<AdvantageEstimate> {
    check_inputs(test, p, q, n)?;
    let cost = exact_cost(test, n);
    if cost > EXACT_BUDGET {
        return Err(Error::EnumerationBudget { what: "datasets", needed: cost, budget: EXACT_BUDGET });
    }
    let (pw, qw) = (p.weights(), q.weights());
    let mut value = 0.0;
    if test.is_symmetric() {
        let lf = ln_factorials(n);
        for_each_composition(n, p.len(), |c| {
            let lm = ln_multinomial(c, &lf);
            let mp = (lm + ln_prob_counts(c, pw)).exp();
            let mq = (lm + ln_prob_counts(c, qw)).exp();
            if mp != mq {
                value += (mp - mq) * test.accept_prob_counts(c);
            }
        });
    } else {
        for x in DatasetIter::new(p.len(), n as usize) {
            let x = crate::dist::Dataset::from_indices_unchecked(x);
            let mp = p.log_prob(&x).exp();
            let mq = q.log_prob(&x).exp();
            if mp != mq {
                value += (mp - mq) * test.accept_prob(&x);
            }
        }
    }
    let value = value.clamp(-1.0, 1.0);
    Ok(AdvantageEstimate {
        value,
        ci_low: value,
        ci_high: value,
        method: AdvantageMethod::ExactEnum,
        n,
        trials: 0,
    })
}

/// Half-width of the two-sided Hoeffding interval for a mean of `trials` values in `[0, 1]`.
pub fn hoeffding_half_width(trials: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * trials as f64)).sqrt()
}

fn mean_accept(test: &PrivateTest, dist: &DiscreteDistribution, n: u64, trials: u64, seed: u64) -> f64 {
    let chunks = trials.div_ceil(CHUNK);
    let sampler = Sampler::new(dist.weights());
    let sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = split(seed, c);
            let len = CHUNK.min(trials - c * CHUNK);
            let mut s = 0.0;
            for _ in 0..len {
                s += if test.is_symmetric() {
                    test.accept_prob_counts(&multinomial(dist.weights(), n, &mut rng))
                } else {
                    let x: Vec<usize> = (0..n).map(|_| sampler.draw(&mut rng)).collect();
                    test.accept_prob(&crate::dist::Dataset::from_indices_unchecked(x))
                };
            }
            s
        })
        .collect();
    sums.iter().sum::<f64>() / trials as f64
}

/// Monte-Carlo advantage: averages the exact acceptance probability over
/// `trials` datasets from each of `P^n` and `Q^n`.
///
/// The result depends only on `rng`'s state, not on thread scheduling.
pub fn advantage_mc<R: Rng + ?Sized>(
    test: &PrivateTest,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    n: u64,
    trials: u64,
    rng: &mut R,
) -> Result<AdvantageEstimate> {
    check_inputs(test, p, q, n)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let seed_p = fork_seed(rng);
    let seed_q = fork_seed(rng);
    let mp = mean_accept(test, p, n, trials, seed_p);
    let mq = mean_accept(test, q, n, trials, seed_q);
    let value = mp - mq;
    let h = hoeffding_half_width(trials, CI_DELTA_PER_MEAN);
    Ok(AdvantageEstimate {
        value,
        ci_low: (value - 2.0 * h).max(-1.0),
        ci_high: (value + 2.0 * h).min(1.0),
        method: AdvantageMethod::MonteCarlo,
        n,
        trials,
    })
}

/// Exact when affordable, otherwise Monte Carlo with `trials` draws per side.
pub fn advantage_auto<R: Rng + ?Sized>(
    test: &PrivateTest,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    n: u64,
    trials: u64,
    rng: &mut R,
) -> Result<AdvantageEstimate> {
    if exact_cost(test, n) <= EXACT_BUDGET {
        advantage_exact(test, p, q, n)
    } else {
        advantage_mc(test, p, q, n, trials, rng)
    }
}

/// Limits for [`sample_complexity_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBudget {
    /// Largest sample size considered.
    pub max_n: u64,
    /// Monte-Carlo trials per side on the first attempt at a sample size.
    pub trials: u64,
    /// Undecided sample sizes are retried with four times the trials, up to this many.
    pub max_trials: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_n: 1 << 22, trials: 25_000, max_trials: 100_000 }
    }
}

impl SearchBudget {
    /// Budget whose Monte-Carlo cells use at most `max_trials` trials per side.
    pub fn with_max_trials(max_trials: u64) -> Self {
        Self { trials: (max_trials / 4).max(1), max_trials, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Decision {
    Accept,
    Reject,
    Undecided,
}

/// Outcome of the sample-complexity search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    /// Smallest sample size certified to reach the target.
    pub n_star: u64,
    /// Every `n < band.0` was rejected; `band.1 = n_star` was accepted.
    pub band: (u64, u64),
    /// True when `band.0 == band.1`, i.e. every size below `n_star` that was probed was rejected outright.
    pub resolved: bool,
    /// Advantage estimate at `n_star`.
    pub advantage: AdvantageEstimate,
    /// Number of sample sizes evaluated.
    pub evaluations: usize,
}

/// Smallest `n` whose advantage reaches `target`, assuming the advantage is
/// nondecreasing in `n`.
///
/// Doubling finds a bracket, then two bisections locate the last rejected and
/// the first accepted size. A size is accepted when the interval's lower end
/// reaches `target` and rejected when its upper end falls below; exact
/// evaluations decide every size. When Monte Carlo leaves sizes undecided
/// the returned band is wider than one.
pub fn sample_complexity_search<R: Rng + ?Sized>(
    test: &PrivateTest,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    target: f64,
    budget: SearchBudget,
    rng: &mut R,
) -> Result<SearchResult> {
    check_inputs(test, p, q, 1)?;
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter(format!("target must lie in (0, 1], got {target}")));
    }
    if test.fixed_length().is_some() {
        return Err(Error::InvalidParameter("the test is defined on a single sample size".into()));
    }
    type Cache = std::collections::BTreeMap<u64, (Decision, AdvantageEstimate)>;
    let mut cache = Cache::new();
    let decide = |n: u64, rng: &mut R, cache: &mut Cache| -> Result<Decision> {
        if let Some((d, _)) = cache.get(&n) {
            return Ok(*d);
        }
        let (d, est) = if exact_cost(test, n) <= EXACT_BUDGET {
            let est = advantage_exact(test, p, q, n)?;
            (if est.value >= target { Decision::Accept } else { Decision::Reject }, est)
        } else {
            let mut trials = budget.trials.max(1);
            loop {
                let est = advantage_mc(test, p, q, n, trials, rng)?;
                if est.ci_low >= target {
                    break (Decision::Accept, est);
                }
                if est.ci_high < target {
                    break (Decision::Reject, est);
                }
                if trials >= budget.max_trials {
                    break (Decision::Undecided, est);
                }
                trials = (trials * 4).min(budget.max_trials);
            }
        };
        cache.insert(n, (d, est));
        Ok(d)
    };

    // bracket
    let mut last_reject = 0u64;
    let mut last_non_accept = 0u64;
    let mut n = 1u64;
    let first_accept = loop {
        match decide(n, rng, &mut cache)? {
            Decision::Accept => break n,
            Decision::Reject => {
                last_reject = n;
                last_non_accept = n;
            }
            Decision::Undecided => last_non_accept = n,
        }
        if n >= budget.max_n {
            return Err(Error::BudgetExceeded { band_low: last_non_accept, band_high: None });
        }
        n = (n * 2).min(budget.max_n);
    };

    // smallest accepted size
    let (mut lo, mut hi) = (last_non_accept, first_accept);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if decide(mid, rng, &mut cache)? == Decision::Accept {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let n_star = hi;

    // largest rejected size below it; only needed when `n_star - 1` was left undecided
    let mut lo_r = last_reject.min(lo);
    if lo == 0 || cache[&lo].0 == Decision::Reject {
        lo_r = lo;
    } else {
        let mut hi_r = lo;
        while hi_r - lo_r > 1 {
            let mid = lo_r + (hi_r - lo_r) / 2;
            if decide(mid, rng, &mut cache)? == Decision::Reject {
                lo_r = mid;
            } else {
                hi_r = mid;
            }
        }
    }
    let band_low = lo_r + 1;
    let advantage = cache[&n_star].1;
    Ok(SearchResult {
        n_star,
        band: (band_low, n_star),
        resolved: band_low == n_star,
        advantage,
        evaluations: cache.len(),
    })
}

/// Sample complexity up to constants: `1 / (eps tau + (1 - tau) H^2(P', Q'))`.
///
/// When `tau = 1` the Hellinger term is absent and the value is `1 / eps`.
pub fn theoretical_sc(trimmed: &TrimmedPair) -> Result<f64> {
    let h = trimmed.hellinger_sq_prime().unwrap_or(0.0);
    let tau = if trimmed.has_prime() { trimmed.tau } else { 1.0 };
    let denom = trimmed.eps * tau + (1.0 - tau) * h;
    if !(denom > 0.0) {
        return Err(Error::DegeneratePair);
    }
    Ok(1.0 / denom)
}

/// Closed form of the one-sample scLLR advantage:
/// `1/2 [ (tanh(eps/4) + tanh(eps'/4)) tau + C (1 - tau) H^2(P', Q') ]`
/// with `C =` [`CLOSED_FORM_HELLINGER_FACTOR`].
pub fn scllr_advantage_closed_form(trimmed: &TrimmedPair) -> Result<f64> {
    scllr_advantage_closed_form_with(trimmed, CLOSED_FORM_HELLINGER_FACTOR)
}

/// [`scllr_advantage_closed_form`] with an explicit factor `C`.
///
/// For `tau = 1` the Hellinger term vanishes and the disjoint-support value is returned.
pub fn scllr_advantage_closed_form_with(trimmed: &TrimmedPair, c: f64) -> Result<f64> {
    let clamp_term = ((0.25 * trimmed.eps).tanh() + (0.25 * trimmed.eps_prime).tanh()) * trimmed.tau;
    let hellinger_term = match trimmed.hellinger_sq_prime() {
        Some(h) => (1.0 - trimmed.tau) * h,
        None if trimmed.tau >= 1.0 - crate::trim::TAU_ONE_TOL => 0.0,
        None => return Err(Error::UndefinedPrime),
    };
    Ok(0.5 * (clamp_term + c * hellinger_term))
}
