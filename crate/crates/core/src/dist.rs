//! Finite discrete distributions, datasets and the divergences between them.
//!
//! All quantities are exact sums over a finite support. Two distributions are
//! comparable only when they share the same label sequence (same labels, same
//! order); the divergence functions reject anything else with
//! [`DistError::SupportMismatch`].
//!
//! Zero-probability conventions: a term with `P(x) = Q(x) = 0` contributes
//! nothing, and `P(x) log(P(x)/0)` is `+inf` when `P(x) > 0`. Infinite values
//! are returned as ordinary `f64` infinities, never as errors.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the total mass of a distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Weights in `[-NEGATIVE_CLAMP_TOL, 0)` are treated as rounding noise and set to zero.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("labels and weights have different lengths ({labels} vs {weights})")]
    MismatchedLengths { labels: usize, weights: usize },
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("distributions are not defined over the same support")]
    SupportMismatch,
    #[error("alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("value {value} outside of [0, 1]")]
    OutOfRange { value: f64 },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("index {index} is not valid for a support of size {support}")]
    InvalidIndex { index: usize, support: usize },
}

/// A label in a distribution file: either a string or an integer.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawLabel {
    Str(String),
    Int(i64),
}

impl From<RawLabel> for String {
    fn from(l: RawLabel) -> Self {
        match l {
            RawLabel::Str(s) => s,
            RawLabel::Int(i) => i.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct RawDistribution {
    labels: Vec<RawLabel>,
    weights: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = DistError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        DiscreteDistribution::new(raw.labels.into_iter().map(String::from).collect(), raw.weights)
    }
}

/// A probability distribution over a finite, labelled support.
///
/// Zero-weight atoms are allowed; pairs such as `Ber(0)` against `Ber(a)`
/// need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validate and build a distribution.
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self, DistError> {
        if labels.len() != weights.len() {
            return Err(DistError::MismatchedLengths {
                labels: labels.len(),
                weights: weights.len(),
            });
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(DistError::DuplicateLabel(l.clone()));
            }
        }
        let mut weights = weights;
        for (index, w) in weights.iter_mut().enumerate() {
            if w.is_nan() || *w < -NEGATIVE_CLAMP_TOL {
                return Err(DistError::NegativeWeight { index, value: *w });
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistError::NotNormalized { sum });
        }
        Ok(Self { labels, weights })
    }

    /// Distribution over labels `"0"`, `"1"`, ... with the given weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DistError> {
        let labels = (0..weights.len()).map(|i| i.to_string()).collect();
        Self::new(labels, weights)
    }

    /// `Ber(p)` over labels `["0", "1"]`, with `p` the mass on `"1"`.
    pub fn bernoulli(p: f64) -> Result<Self, DistError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::OutOfRange { value: p });
        }
        Self::from_weights(vec![1.0 - p, p])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Ok when `other` is defined over exactly the same label sequence.
    pub fn check_same_support(&self, other: &Self) -> Result<(), DistError> {
        if self.labels == other.labels {
            Ok(())
        } else {
            Err(DistError::SupportMismatch)
        }
    }

    /// A copy with the same labels and new weights (validated).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, DistError> {
        Self::new(self.labels.clone(), weights)
    }

    /// Build a distribution from non-negative weights by normalizing them,
    /// keeping this distribution's labels.
    pub(crate) fn renormalized(&self, weights: &[f64]) -> Self {
        let mass: f64 = weights.iter().sum();
        Self {
            labels: self.labels.clone(),
            weights: weights.iter().map(|w| (w / mass).max(0.0)).collect(),
        }
    }

    /// The `n`-fold product distribution on the `len()^n` point product
    /// support. Labels are the component labels joined with `,`; the order is
    /// the odometer order of [`crate::enumerate::DatasetIter`].
    pub fn product(&self, n: usize) -> Self {
        let mut labels = vec![String::new()];
        let mut weights = vec![1.0];
        for _ in 0..n {
            let mut next_labels = Vec::with_capacity(labels.len() * self.len());
            let mut next_weights = Vec::with_capacity(labels.len() * self.len());
            for (l, w) in labels.iter().zip(&weights) {
                for (a, p) in self.labels.iter().zip(&self.weights) {
                    next_labels.push(if l.is_empty() { a.clone() } else { format!("{l},{a}") });
                    next_weights.push(w * p);
                }
            }
            labels = next_labels;
            weights = next_weights;
        }
        Self { labels, weights }
    }

    /// Draw `n` i.i.d. points. One uniform per point, inverse-CDF.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let sampler = Sampler::new(&self.weights);
        Dataset {
            entries: (0..n).map(|_| sampler.draw(rng)).collect(),
        }
    }

    /// Counts of a multinomial `(n, self)` draw, one binomial per atom.
    pub fn sample_counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Vec<u64> {
        multinomial(&self.weights, n, rng)
    }

    /// `log P^n(x)`; `-inf` if any entry has zero probability.
    pub fn log_prob(&self, x: &Dataset) -> f64 {
        x.entries.iter().map(|&i| self.weights[i].ln()).sum()
    }
}

impl fmt::Display for DiscreteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (l, w)) in self.labels.iter().zip(&self.weights).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}: {w}")?;
        }
        write!(f, "}}")
    }
}

/// Inverse-CDF sampler over a fixed weight vector.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { cdf }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("sampler over an empty support");
        let u = rng.random::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Multinomial counts by sequential conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(weights: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; weights.len()];
    let mut remaining = n;
    let mut mass_left: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == weights.len() {
            counts[i] = remaining;
            break;
        }
        let p = if mass_left > 0.0 { (w / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let c = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        counts[i] = c;
        remaining -= c;
        mass_left -= w;
    }
    counts
}

/// Non-negative weights over a support whose total mass is at most one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubDistribution {
    labels: Vec<String>,
    weights: Vec<f64>,
    mass: f64,
}

impl SubDistribution {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self, DistError> {
        if labels.len() != weights.len() {
            return Err(DistError::MismatchedLengths {
                labels: labels.len(),
                weights: weights.len(),
            });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(DistError::NegativeWeight { index, value });
        }
        let mass: f64 = weights.iter().sum();
        if mass > 1.0 + NORMALIZATION_TOL {
            return Err(DistError::NotNormalized { sum: mass });
        }
        Ok(Self { labels, weights, mass })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// A sample `x = (x_1, ..., x_n)` stored as indices into a support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dataset {
    entries: Vec<usize>,
}

impl Dataset {
    /// Dataset of indices, each checked against `support_size`.
    pub fn new(entries: Vec<usize>, support_size: usize) -> Result<Self, DistError> {
        if let Some(&index) = entries.iter().find(|&&i| i >= support_size) {
            return Err(DistError::InvalidIndex {
                index,
                support: support_size,
            });
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_indices_unchecked(entries: Vec<usize>) -> Self {
        Self { entries }
    }

    /// Resolve labels against the support of `dist`.
    pub fn from_labels<S: AsRef<str>>(dist: &DiscreteDistribution, labels: &[S]) -> Result<Self, DistError> {
        let entries = labels
            .iter()
            .map(|l| {
                dist.index_of(l.as_ref())
                    .ok_or_else(|| DistError::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    pub fn to_labels<'a>(&self, dist: &'a DiscreteDistribution) -> Vec<&'a str> {
        self.entries.iter().map(|&i| dist.labels()[i].as_str()).collect()
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Occurrence count of every support index.
    pub fn counts(&self, support_size: usize) -> Vec<u64> {
        let mut c = vec![0u64; support_size];
        for &i in &self.entries {
            c[i] += 1;
        }
        c
    }

    /// Contiguous sub-dataset `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            entries: self.entries[start..end].to_vec(),
        }
    }
}

impl From<Vec<usize>> for Dataset {
    fn from(entries: Vec<usize>) -> Self {
        Self { entries }
    }
}

/// Squared Hellinger distance `1/2 * sum (sqrt P - sqrt Q)^2`.
pub fn hellinger_sq(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64, DistError> {
    p.check_same_support(q)?;
    Ok(hellinger_sq_weights(p.weights(), q.weights()))
}

pub(crate) fn hellinger_sq_weights(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// Total variation distance `1/2 * sum |P - Q|`.
pub fn total_variation(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64, DistError> {
    p.check_same_support(q)?;
    let s: f64 = p.weights().iter().zip(q.weights()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// `KL(P || Q)` in nats; `+inf` when `P` is not absolutely continuous w.r.t. `Q`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64, DistError> {
    p.check_same_support(q)?;
    Ok(kl_weights(p.weights(), q.weights()))
}

pub(crate) fn kl_weights(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        total += a * (a / b).ln();
    }
    total.max(0.0)
}

/// Hockey-stick divergence `sum max(P - alpha Q, 0)`.
pub fn hockey_stick(p: &DiscreteDistribution, q: &DiscreteDistribution, alpha: f64) -> Result<f64, DistError> {
    p.check_same_support(q)?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(DistError::NegativeAlpha(alpha));
    }
    Ok(hockey_stick_weights(p.weights(), q.weights(), alpha))
}

pub(crate) fn hockey_stick_weights(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - alpha * b).max(0.0)).sum()
}

/// `H^2(P^n, Q^n) = 1 - (1 - h2)^n`, evaluated as `-expm1(n ln(1 - h2))`.
pub fn hellinger_tensorize(h2: f64, n: u64) -> Result<f64, DistError> {
    if !(0.0..=1.0).contains(&h2) {
        return Err(DistError::OutOfRange { value: h2 });
    }
    if n == 0 || h2 == 0.0 {
        return Ok(0.0);
    }
    if h2 == 1.0 {
        return Ok(1.0);
    }
    Ok((-(n as f64 * (-h2).ln_1p()).exp_m1()).clamp(0.0, 1.0))
}
