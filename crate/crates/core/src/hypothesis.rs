//! The likelihood-ratio test family and tools to audit it.
//!
//! Every test here is described by its exact acceptance probability: the
//! chance that it answers `"P"` on a given dataset. Running a test is one
//! uniform draw against that probability.
//!
//! | kind      | statistic `v`                         | accept probability            |
//! |-----------|---------------------------------------|-------------------------------|
//! | threshold | unclamped log-likelihood ratio        | `1[v >= kappa]`               |
//! | sLLR      | unclamped log-likelihood ratio        | `g(v) = e^{v/2} / (1 + e^{v/2})` |
//! | scLLR     | ratio clamped to `[a, b]` per sample  | `g(v)`                        |
//! | ncLLR     | ratio clamped to `[a, b]` per sample  | `h(v) = Pr[v + Lap(2) > 0]`   |
//!
//! Per-sample log-ratios use `log(0/0) = 0`; `+-inf` ratios clamp to the
//! nearest bound. An unclamped sum that meets both `+inf` and `-inf` is
//! treated as `0`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::PotentialFunction;
use crate::dist::{Dataset, DiscreteDistribution};
use crate::enumerate::dataset_count;
use crate::error::{Error, Result};
use crate::rng::uniform;
use crate::trim::TrimmedPair;

/// Beyond this magnitude the logistic and Laplace-tail functions return exactly 0 or 1.
pub const SATURATION: f64 = 700.0;

/// Scale of the Laplace noise added by ncLLR.
pub const NCLLR_NOISE_SCALE: f64 = 2.0;

/// Slack allowed by the exhaustive DP verifier.
pub const DP_TOLERANCE: f64 = 1e-9;

/// Cap on `n * k^(n+1)` neighbour comparisons in the exhaustive verifier.
pub const DP_PAIR_BUDGET: f64 = 1e8;

/// Cap on the number of datasets enumerated by the exhaustive verifier.
pub const DP_DATASET_BUDGET: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    LlrThreshold,
    Sllr,
    Scllr,
    Ncllr,
    Potential,
    Constant,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::LlrThreshold => "llr-threshold",
            TestKind::Sllr => "sllr",
            TestKind::Scllr => "scllr",
            TestKind::Ncllr => "ncllr",
            TestKind::Potential => "potential",
            TestKind::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestVerdict {
    P,
    Q,
}

impl TestVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            TestVerdict::P => "P",
            TestVerdict::Q => "Q",
        }
    }

    /// `+1` for `"P"`, `-1` for `"Q"`.
    pub fn sign(self) -> i8 {
        match self {
            TestVerdict::P => 1,
            TestVerdict::Q => -1,
        }
    }
}

/// `e^{v/2} / (1 + e^{v/2})`, saturating for `|v| > 700`.
pub fn soft_accept(v: f64) -> f64 {
    if v > SATURATION {
        1.0
    } else if v < -SATURATION {
        0.0
    } else if v >= 0.0 {
        1.0 / (1.0 + (-0.5 * v).exp())
    } else {
        let e = (0.5 * v).exp();
        e / (1.0 + e)
    }
}

/// `Pr[v + Lap(2) > 0]`, saturating for `|v| > 700`.
pub fn noisy_accept(v: f64) -> f64 {
    if v > SATURATION {
        1.0
    } else if v < -SATURATION {
        0.0
    } else if v > 0.0 {
        1.0 - 0.5 * (-0.5 * v).exp()
    } else if v < 0.0 {
        0.5 * (0.5 * v).exp()
    } else {
        0.5
    }
}

/// `log P(x)/Q(x)` per support point, with `log(0/0) = 0`.
pub fn log_ratios(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Vec<f64> {
    p.weights()
        .iter()
        .zip(q.weights())
        .map(|(&a, &b)| match (a > 0.0, b > 0.0) {
            (false, false) => 0.0,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (true, true) => (a / b).ln(),
        })
        .collect()
}

fn clamp_ratio(r: f64, a: f64, b: f64) -> f64 {
    r.max(a).min(b)
}

/// Sum of per-sample contributions weighted by counts; `+inf` and `-inf` together give `0`.
fn weighted_sum(values: &[f64], counts: &[u64]) -> f64 {
    let mut finite = 0.0;
    let mut pos = false;
    let mut neg = false;
    for (&v, &c) in values.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        if v == f64::INFINITY {
            pos = true;
        } else if v == f64::NEG_INFINITY {
            neg = true;
        } else {
            finite += c as f64 * v;
        }
    }
    match (pos, neg) {
        (true, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => finite,
    }
}

/// `cLLR_{a,b}(x) = sum_i [log P(x_i)/Q(x_i)]_a^b`.
///
/// With `a = -inf`, `b = +inf` this is the plain log-likelihood ratio.
pub fn cllr(p: &DiscreteDistribution, q: &DiscreteDistribution, a: f64, b: f64, x: &Dataset) -> Result<f64> {
    p.check_same_support(q)?;
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::InvalidBounds { a, b });
    }
    let r: Vec<f64> = log_ratios(p, q).into_iter().map(|v| clamp_ratio(v, a, b)).collect();
    Ok(weighted_sum(&r, &x.counts(p.len())))
}

/// A randomized binary test with an exactly computable acceptance probability.
#[derive(Debug, Clone)]
pub struct PrivateTest {
    kind: TestKind,
    a: f64,
    b: f64,
    kappa: f64,
    claimed_eps: f64,
    support_size: usize,
    /// Clamped per-point log-ratio in the caller's frame.
    contrib: Vec<f64>,
    constant: f64,
    potential: Option<Arc<PotentialFunction>>,
}

impl PrivateTest {
    fn statistic_test(
        kind: TestKind,
        p: &DiscreteDistribution,
        q: &DiscreteDistribution,
        a: f64,
        b: f64,
        claimed_eps: f64,
    ) -> Result<Self> {
        p.check_same_support(q)?;
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::InvalidBounds { a, b });
        }
        let contrib = log_ratios(p, q).into_iter().map(|v| clamp_ratio(v, a, b)).collect();
        Ok(Self {
            kind,
            a,
            b,
            kappa: 0.0,
            claimed_eps,
            support_size: p.len(),
            contrib,
            constant: 0.0,
            potential: None,
        })
    }

    /// Deterministic test: `"P"` iff the log-likelihood ratio is at least `kappa`. No privacy claim.
    pub fn llr_threshold(p: &DiscreteDistribution, q: &DiscreteDistribution, kappa: f64) -> Result<Self> {
        let mut t = Self::statistic_test(TestKind::LlrThreshold, p, q, f64::NEG_INFINITY, f64::INFINITY, 0.0)?;
        t.kappa = kappa;
        Ok(t)
    }

    /// Soft LLR test. No privacy claim.
    pub fn sllr(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<Self> {
        Self::statistic_test(TestKind::Sllr, p, q, f64::NEG_INFINITY, f64::INFINITY, 0.0)
    }

    /// Soft clamped LLR with explicit bounds; claims `(b - a) / 2`.
    pub fn scllr_with_bounds(p: &DiscreteDistribution, q: &DiscreteDistribution, a: f64, b: f64) -> Result<Self> {
        Self::statistic_test(TestKind::Scllr, p, q, a, b, 0.5 * (b - a))
    }

    /// Noisy clamped LLR with explicit bounds; claims `(b - a) / 2`.
    pub fn ncllr_with_bounds(p: &DiscreteDistribution, q: &DiscreteDistribution, a: f64, b: f64) -> Result<Self> {
        Self::statistic_test(TestKind::Ncllr, p, q, a, b, 0.5 * (b - a))
    }

    /// scLLR clamped to `[-eps', eps]` (caller frame), claiming `eps`.
    pub fn scllr(trimmed: &TrimmedPair) -> Self {
        let (p, q) = trimmed.caller_pair();
        let (a, b) = trimmed.caller_clamp_bounds();
        let mut t = Self::statistic_test(TestKind::Scllr, p, q, a, b, trimmed.eps).expect("trimmed pair is consistent");
        t.claimed_eps = trimmed.eps;
        t
    }

    /// ncLLR clamped to `[-eps', eps]` (caller frame) with `Lap(2)` noise, claiming `eps`.
    pub fn ncllr(trimmed: &TrimmedPair) -> Self {
        let (p, q) = trimmed.caller_pair();
        let (a, b) = trimmed.caller_clamp_bounds();
        let mut t = Self::statistic_test(TestKind::Ncllr, p, q, a, b, trimmed.eps).expect("trimmed pair is consistent");
        t.claimed_eps = trimmed.eps;
        t
    }

    /// Accepts with the same probability on every dataset; `0`-DP.
    pub fn constant(prob: f64, support_size: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidParameter(format!("acceptance probability {prob} outside [0, 1]")));
        }
        Ok(Self {
            kind: TestKind::Constant,
            a: 0.0,
            b: 0.0,
            kappa: 0.0,
            claimed_eps: 0.0,
            support_size,
            contrib: vec![0.0; support_size],
            constant: prob,
            potential: None,
        })
    }

    pub(crate) fn from_potential(f: PotentialFunction, claimed_eps: f64) -> Self {
        Self {
            kind: TestKind::Potential,
            a: 0.0,
            b: 0.0,
            kappa: 0.0,
            claimed_eps,
            support_size: f.support_size(),
            contrib: Vec::new(),
            constant: 0.0,
            potential: Some(Arc::new(f)),
        }
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn claimed_eps(&self) -> f64 {
        self.claimed_eps
    }

    /// Clamp bounds `(a, b)`; infinite for the unclamped kinds.
    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    /// Fixed dataset length, for tests defined on a single `X^n`.
    pub fn fixed_length(&self) -> Option<usize> {
        self.potential.as_ref().map(|f| f.n())
    }

    /// True when the acceptance probability depends on the dataset only through its counts.
    pub fn is_symmetric(&self) -> bool {
        self.kind != TestKind::Potential
    }

    /// Statistic value on a count vector.
    pub fn statistic_counts(&self, counts: &[u64]) -> f64 {
        weighted_sum(&self.contrib, counts)
    }

    fn accept_from_statistic(&self, v: f64) -> f64 {
        match self.kind {
            TestKind::LlrThreshold => {
                if v >= self.kappa {
                    1.0
                } else {
                    0.0
                }
            }
            TestKind::Sllr | TestKind::Scllr => soft_accept(v),
            TestKind::Ncllr => noisy_accept(v),
            TestKind::Constant => self.constant,
            TestKind::Potential => unreachable!("potential tests are not count based"),
        }
    }

    fn reject_from_statistic(&self, v: f64) -> f64 {
        match self.kind {
            TestKind::Sllr | TestKind::Scllr => soft_accept(-v),
            TestKind::Ncllr => noisy_accept(-v),
            _ => 1.0 - self.accept_from_statistic(v),
        }
    }

    /// Acceptance probability from a count vector (symmetric kinds only).
    pub fn accept_prob_counts(&self, counts: &[u64]) -> f64 {
        self.accept_from_statistic(self.statistic_counts(counts))
    }

    /// `1 - accept_prob_counts`, computed without cancellation.
    pub fn reject_prob_counts(&self, counts: &[u64]) -> f64 {
        self.reject_from_statistic(self.statistic_counts(counts))
    }

    /// Probability of answering `"P"` on `x`.
    pub fn accept_prob(&self, x: &Dataset) -> f64 {
        match &self.potential {
            Some(f) => f.accept_prob(x),
            None => self.accept_prob_counts(&x.counts(self.support_size)),
        }
    }

    /// Probability of answering `"Q"` on `x`.
    pub fn reject_prob(&self, x: &Dataset) -> f64 {
        match &self.potential {
            Some(f) => 1.0 - f.accept_prob(x),
            None => self.reject_prob_counts(&x.counts(self.support_size)),
        }
    }
}

/// sLLR acceptance probability `g(LLR(x))`.
pub fn sllr_accept_prob(p: &DiscreteDistribution, q: &DiscreteDistribution, x: &Dataset) -> Result<f64> {
    Ok(PrivateTest::sllr(p, q)?.accept_prob(x))
}

/// scLLR acceptance probability `g(cLLR_{-eps', eps}(x))`, caller frame.
pub fn scllr_accept_prob(trimmed: &TrimmedPair, x: &Dataset) -> f64 {
    PrivateTest::scllr(trimmed).accept_prob(x)
}

/// ncLLR acceptance probability `h(cLLR_{-eps', eps}(x))`, caller frame.
pub fn ncllr_accept_prob(trimmed: &TrimmedPair, x: &Dataset) -> f64 {
    PrivateTest::ncllr(trimmed).accept_prob(x)
}

/// One draw from the Laplace distribution with the given scale, by inverse CDF.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonPositiveScale(scale));
    }
    // shift onto the open interval (0, 1) so both logarithms stay finite
    let u = uniform(rng) + f64::EPSILON / 4.0;
    Ok(if u < 0.5 { scale * (2.0 * u).ln() } else { -scale * (2.0 * (1.0 - u)).ln() })
}

/// Run the test once: `"P"` with probability `accept_prob(x)`.
pub fn run_test<R: Rng + ?Sized>(test: &PrivateTest, x: &Dataset, rng: &mut R) -> TestVerdict {
    if uniform(rng) < test.accept_prob(x) {
        TestVerdict::P
    } else {
        TestVerdict::Q
    }
}

/// Result of the exhaustive neighbour check.
#[derive(Debug, Clone, Serialize)]
pub struct DpReport {
    pub max_log_ratio: f64,
    pub witness: Option<(Dataset, Dataset)>,
    pub claimed_eps: f64,
    pub pass: bool,
}

fn log_ratio(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else if a == 0.0 {
        f64::NEG_INFINITY
    } else {
        (a / b).ln()
    }
}

/// Exact privacy loss of `test` over all neighbouring pairs in `X^n`.
///
/// Two datasets are neighbours when they differ in exactly one position.
pub fn verify_dp_exhaustive(test: &PrivateTest, support_size: usize, n: usize) -> Result<DpReport> {
    let k = support_size;
    if let Some(len) = test.fixed_length() {
        if len != n {
            return Err(Error::InvalidParameter(format!("test is defined on datasets of length {len}, not {n}")));
        }
    }
    if k != test.support_size() {
        return Err(Error::InvalidParameter(format!(
            "support size {k} does not match the test's {}",
            test.support_size()
        )));
    }
    let total = dataset_count(k, n).map(|c| c as f64).unwrap_or(f64::INFINITY);
    if total > DP_DATASET_BUDGET {
        return Err(Error::EnumerationBudget { what: "datasets", needed: total, budget: DP_DATASET_BUDGET });
    }
    let pairs = n as f64 * total * k as f64;
    if pairs > DP_PAIR_BUDGET {
        return Err(Error::EnumerationBudget { what: "neighbour pairs", needed: pairs, budget: DP_PAIR_BUDGET });
    }
    let total = total as usize;
    let mut acc = Vec::with_capacity(total);
    let mut rej = Vec::with_capacity(total);
    for x in crate::enumerate::DatasetIter::new(k, n) {
        let x = Dataset::from_indices_unchecked(x);
        acc.push(test.accept_prob(&x));
        rej.push(test.reject_prob(&x));
    }
    let mut best = 0.0f64;
    let mut witness = None;
    let mut weights = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        weights[i] = weights[i + 1] * k;
    }
    for code in 0..total {
        for (pos, &w) in weights.iter().enumerate() {
            let d = (code / w) % k;
            for v in d + 1..k {
                let other = code + (v - d) * w;
                let r = log_ratio(acc[code], acc[other])
                    .max(log_ratio(acc[other], acc[code]))
                    .max(log_ratio(rej[code], rej[other]))
                    .max(log_ratio(rej[other], rej[code]));
                if r > best || (witness.is_none() && r >= best && r > 0.0) {
                    best = r;
                    let x = crate::enumerate::decode(code, k, n);
                    let mut y = x.clone();
                    y[pos] = v;
                    witness = Some((Dataset::from(x), Dataset::from(y)));
                }
            }
        }
    }
    let claimed_eps = test.claimed_eps();
    Ok(DpReport {
        max_log_ratio: best,
        witness,
        claimed_eps,
        pass: best <= claimed_eps + DP_TOLERANCE,
    })
}

/// First two moments of the clamped statistic on `n` i.i.d. samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    /// `E_{P^n}[cLLR] - E_{Q^n}[cLLR]`.
    pub delta_gap: f64,
    pub var_p: f64,
    pub var_q: f64,
    pub mean_p: f64,
    pub mean_q: f64,
    pub n: u64,
}

/// Moments of `cLLR_{a,b}` under `P^n` and `Q^n` from single-sample sums.
pub fn clamped_moments(p: &DiscreteDistribution, q: &DiscreteDistribution, a: f64, b: f64, n: u64) -> Result<MomentReport> {
    p.check_same_support(q)?;
    if a.is_nan() || b.is_nan() || a > b || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidBounds { a, b });
    }
    let r: Vec<f64> = log_ratios(p, q).into_iter().map(|v| clamp_ratio(v, a, b)).collect();
    let moments = |w: &[f64]| {
        let m: f64 = w.iter().zip(&r).map(|(w, r)| w * r).sum();
        let s: f64 = w.iter().zip(&r).map(|(w, r)| w * (r - m) * (r - m)).sum();
        (m, s.max(0.0))
    };
    let (mp, vp) = moments(p.weights());
    let (mq, vq) = moments(q.weights());
    let nf = n as f64;
    Ok(MomentReport {
        delta_gap: nf * (mp - mq),
        var_p: nf * vp,
        var_q: nf * vq,
        mean_p: nf * mp,
        mean_q: nf * mq,
        n,
    })
}

/// Moments of the trimmed pair's clamped statistic `cLLR_{-eps', eps}` (caller frame).
///
/// Disjoint pairs need no special branch: every atom contributes its clamp bound.
pub fn gap_and_variances(trimmed: &TrimmedPair, n: u64) -> MomentReport {
    let (p, q) = trimmed.caller_pair();
    let (a, b) = trimmed.caller_clamp_bounds();
    clamped_moments(p, q, a, b, n).expect("trimmed pair is consistent")
}

/// A sample size certified by the Chebyshev argument, with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VargapCertificate {
    pub n_prime: u64,
    /// Accept `"P"` when the statistic on `n_prime` samples is at least this value.
    pub threshold: f64,
}

/// `n' = ceil(12 c^2 n)`, valid when `max(sd_P, sd_Q) <= c |gap|`.
pub fn vargap_bound(moments: &MomentReport, c: f64) -> Result<VargapCertificate> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let sigma = moments.var_p.sqrt().max(moments.var_q.sqrt());
    let limit = c * moments.delta_gap.abs();
    if moments.delta_gap == 0.0 || sigma > limit * (1.0 + 1e-12) {
        return Err(Error::HypothesisViolated { sigma, limit });
    }
    let n_prime = (12.0 * c * c * moments.n as f64 - 1e-9).ceil().max(1.0) as u64;
    let scale = n_prime as f64 / moments.n.max(1) as f64;
    Ok(VargapCertificate {
        n_prime,
        threshold: 0.5 * (moments.mean_p + moments.mean_q) * scale,
    })
}
