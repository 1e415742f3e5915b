//! Private change-point detection by block reduction.
//!
//! The data are cut into consecutive blocks of `B` samples. A private test
//! turns each block into a bit `z_j` (`+1` for "looks like P", `-1` otherwise),
//! and the change is located on the bit sequence by minimizing the suffix
//! sums `l(t) = sum_{j >= t} z_j`. Blocks are disjoint, so the bits, and
//! everything computed from them, inherit the per-block privacy guarantee.
//!
//! Sample indices are 1-based. A change point `k` means the first `k`
//! samples come from `P` and the rest from `Q`; the estimate is
//! `k_hat = (j - 1) B` for the minimizing block `j`. Samples past the last full
//! block are ignored.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::advantage::{sample_complexity_search, SearchBudget};
use crate::dist::{Dataset, DiscreteDistribution, Sampler};
use crate::error::{Error, Result};
use crate::hypothesis::{run_test, PrivateTest};
use crate::trim::trim_pair;

/// Per-block success level used to size blocks; kept above 2/3 so the
/// pre- and post-change bit probabilities are strictly separated.
pub const BLOCK_TARGET: f64 = 0.7;

/// Minimum calibration success rate demanded of a goodness-of-fit tester.
pub const TESTER_SUCCESS: f64 = 2.0 / 3.0;

/// Location of the minimum suffix sum of a `+-1` sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuffixArgmin {
    /// 1-based index `t` minimizing `l(t)`; ties go to the smallest `t`.
    pub k_hat: usize,
    pub min_suffix: i64,
    /// True when every suffix sum is positive, i.e. the sequence shows no change.
    pub no_change: bool,
}

/// `argmin_t sum_{j >= t} z_j` over `t in 1..=len`, in one backward pass.
pub fn bernoulli_cpd_offline(z: &[i8]) -> Result<SuffixArgmin> {
    if z.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut s = 0i64;
    let mut best = i64::MAX;
    let mut arg = z.len();
    for t in (0..z.len()).rev() {
        s += z[t] as i64;
        if s <= best {
            best = s;
            arg = t + 1;
        }
    }
    Ok(SuffixArgmin { k_hat: arg, min_suffix: best, no_change: best > 0 })
}

/// Result of the streaming detector on a `+-1` stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OnlineArgmin {
    /// Global 1-based index of the estimated change.
    pub k_hat: usize,
    /// Number of stream values consumed.
    pub observed: u64,
    /// 1-based index of the interval that triggered.
    pub trigger_interval: u64,
}

/// Streaming detector: read intervals of `n` values and stop at the first one
/// with strictly more `-1`s than `+1`s, then locate the change among the
/// last `2n` values (fewer if only one interval has been read).
///
/// `beta` is the failure probability the caller sized `n` for; the procedure
/// itself does not depend on it.
pub fn bernoulli_cpd_online<I: IntoIterator<Item = i8>>(stream: I, n: usize, beta: f64) -> Result<OnlineArgmin> {
    if n == 0 {
        return Err(Error::InvalidParameter("interval length must be at least 1".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    let mut it = stream.into_iter();
    let mut window: Vec<i8> = Vec::with_capacity(2 * n);
    let mut observed = 0u64;
    let mut interval = 0u64;
    loop {
        let mut current = Vec::with_capacity(n);
        for _ in 0..n {
            match it.next() {
                Some(v) => current.push(v),
                None => return Err(Error::StreamExhausted { observed: observed + current.len() as u64 }),
            }
        }
        observed += n as u64;
        interval += 1;
        let minus = current.iter().filter(|&&v| v < 0).count();
        if window.len() >= 2 * n {
            window.drain(..n);
        }
        window.extend_from_slice(&current);
        if 2 * minus > n {
            let local = bernoulli_cpd_offline(&window)?;
            let offset = observed as usize - window.len();
            return Ok(OnlineArgmin { k_hat: offset + local.k_hat, observed, trigger_interval: interval });
        }
    }
}

/// Output of the block-level detectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePointResult {
    /// Estimated number of pre-change samples, a multiple of `block_size`.
    pub k_hat: usize,
    pub block_size: usize,
    pub z_sequence: Vec<i8>,
    /// Bits consumed by the online detector.
    pub observed: Option<u64>,
    /// Raw samples consumed by the online detector (`observed * block_size`).
    pub observed_samples: Option<u64>,
    /// The bit sequence shows no change (every suffix sum positive).
    pub no_change: bool,
    pub beta: f64,
}

/// The ncLLR test for `(P, Q, eps)` together with the block size it is run on.
#[derive(Debug, Clone)]
pub struct BlockDetector {
    pub test: PrivateTest,
    pub block_size: usize,
}

impl BlockDetector {
    /// Block size from the sample-complexity search of ncLLR at [`BLOCK_TARGET`].
    pub fn new<R: Rng + ?Sized>(
        p: &DiscreteDistribution,
        q: &DiscreteDistribution,
        eps: f64,
        budget: SearchBudget,
        rng: &mut R,
    ) -> Result<Self> {
        let trimmed = trim_pair(p, q, eps)?;
        let test = PrivateTest::ncllr(&trimmed);
        let found = sample_complexity_search(&test, p, q, BLOCK_TARGET, budget, rng)?;
        Ok(Self { test, block_size: found.n_star as usize })
    }

    /// A fixed block size, skipping the search.
    pub fn with_block_size(p: &DiscreteDistribution, q: &DiscreteDistribution, eps: f64, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidParameter("block size must be at least 1".into()));
        }
        let trimmed = trim_pair(p, q, eps)?;
        Ok(Self { test: PrivateTest::ncllr(&trimmed), block_size })
    }

    fn bit<R: Rng + ?Sized>(&self, block: &[usize], rng: &mut R) -> i8 {
        run_test(&self.test, &Dataset::from(block.to_vec()), rng).sign()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")))
    }
}

fn reduce(z: Vec<i8>, block_size: usize, beta: f64) -> Result<ChangePointResult> {
    let found = bernoulli_cpd_offline(&z)?;
    Ok(ChangePointResult {
        k_hat: (found.k_hat - 1) * block_size,
        block_size,
        z_sequence: z,
        observed: None,
        observed_samples: None,
        no_change: found.no_change,
        beta,
    })
}

/// Offline detection on a stored dataset.
pub fn offline_cpd<R: Rng + ?Sized>(detector: &BlockDetector, data: &Dataset, beta: f64, rng: &mut R) -> Result<ChangePointResult> {
    check_beta(beta)?;
    let b = detector.block_size;
    let blocks = data.len() / b;
    if blocks < 2 {
        return Err(Error::TooFewBlocks { blocks, block_size: b });
    }
    let z = data.entries()[..blocks * b].chunks(b).map(|blk| detector.bit(blk, rng)).collect();
    reduce(z, b, beta)
}

/// Online detection: bits are produced block by block from `stream` and fed
/// to the streaming detector with intervals of `n` bits.
pub fn online_cpd<I, R>(detector: &BlockDetector, stream: I, n: usize, beta: f64, rng: &mut R) -> Result<ChangePointResult>
where
    I: IntoIterator<Item = usize>,
    R: Rng + ?Sized,
{
    check_beta(beta)?;
    let b = detector.block_size;
    let mut samples = stream.into_iter();
    let mut z = Vec::new();
    let found = {
        let bits = std::iter::from_fn(|| {
            let block: Vec<usize> = samples.by_ref().take(b).collect();
            if block.len() < b {
                return None;
            }
            let bit = detector.bit(&block, rng);
            z.push(bit);
            Some(bit)
        });
        bernoulli_cpd_online(bits, n, beta)
    };
    let found = match found {
        Ok(f) => f,
        Err(Error::StreamExhausted { .. }) => {
            return Err(Error::StreamExhausted { observed: z.len() as u64 * b as u64 });
        }
        Err(e) => return Err(e),
    };
    Ok(ChangePointResult {
        k_hat: (found.k_hat - 1) * b,
        block_size: b,
        z_sequence: z,
        observed: Some(found.observed),
        observed_samples: Some(found.observed * b as u64),
        no_change: false,
        beta,
    })
}

/// A private block tester for goodness of fit to a fixed `P`.
pub trait GofTester: Sync {
    /// Number of samples the tester consumes per decision.
    fn block_size(&self) -> usize;
    /// `+1` when the block looks like `P`, `-1` otherwise.
    fn test_block(&self, block: &[usize], rng: &mut dyn RngCore) -> i8;
}

/// ncLLR against one known alternative, used as a goodness-of-fit tester.
#[derive(Debug, Clone)]
pub struct NcllrTester(pub BlockDetector);

impl GofTester for NcllrTester {
    fn block_size(&self) -> usize {
        self.0.block_size
    }

    fn test_block(&self, block: &[usize], rng: &mut dyn RngCore) -> i8 {
        self.0.bit(block, rng)
    }
}

/// `(1 - g) P + g delta_{x_min}` with `x_min` the lightest atom of `P` and
/// `g = gamma / (1 - P(x_min))`, so that its total variation from `P` is `gamma`.
pub fn gof_probe(p: &DiscreteDistribution, gamma: f64) -> Result<DiscreteDistribution> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let (i_min, &w_min) = p
        .weights()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or_else(|| Error::InvalidParameter("empty support".into()))?;
    let g = gamma / (1.0 - w_min);
    if g > 1.0 {
        return Err(Error::InvalidParameter(format!("no distribution at distance {gamma} along the lightest atom")));
    }
    let mut w: Vec<f64> = p.weights().iter().map(|v| (1.0 - g) * v).collect();
    w[i_min] += g;
    Ok(p.with_weights(w)?)
}

/// Goodness-of-fit change-point detection with a pluggable tester.
///
/// Before use the tester is calibrated on `calibration` blocks from `P` and
/// from `probe` (by default [`gof_probe`] at distance `gamma`); it must answer
/// correctly on at least 2/3 of each.
#[allow(clippy::too_many_arguments)]
pub fn gof_cpd<R: RngCore>(
    p: &DiscreteDistribution,
    gamma: f64,
    data: &Dataset,
    beta: f64,
    tester: &dyn GofTester,
    probe: Option<&DiscreteDistribution>,
    calibration: usize,
    rng: &mut R,
) -> Result<ChangePointResult> {
    check_beta(beta)?;
    let b = tester.block_size();
    if b == 0 {
        return Err(Error::InvalidParameter("tester block size must be at least 1".into()));
    }
    let probe = match probe {
        Some(d) => {
            p.check_same_support(d)?;
            d.clone()
        }
        None => gof_probe(p, gamma)?,
    };
    if calibration > 0 {
        for (side, dist, want) in [("P", p, 1i8), ("the alternative", &probe, -1i8)] {
            let sampler = Sampler::new(dist.weights());
            let mut hits = 0usize;
            let mut block = vec![0usize; b];
            for _ in 0..calibration {
                block.iter_mut().for_each(|s| *s = sampler.draw(rng));
                if tester.test_block(&block, rng) == want {
                    hits += 1;
                }
            }
            let rate = hits as f64 / calibration as f64;
            if rate < TESTER_SUCCESS {
                return Err(Error::TesterContractViolation { side, rate });
            }
        }
    }
    let blocks = data.len() / b;
    if blocks < 2 {
        return Err(Error::TooFewBlocks { blocks, block_size: b });
    }
    let z = data.entries()[..blocks * b].chunks(b).map(|blk| tester.test_block(blk, rng)).collect();
    reduce(z, b, beta)
}

/// `k` samples from `P` followed by `len - k` samples from `Q`.
pub fn planted_stream<R: Rng + ?Sized>(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    k: usize,
    len: usize,
    rng: &mut R,
) -> Dataset {
    let sp = Sampler::new(p.weights());
    let sq = Sampler::new(q.weights());
    Dataset::from((0..len).map(|i| if i < k { sp.draw(rng) } else { sq.draw(rng) }).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn offline_examples() {
        assert_eq!(bernoulli_cpd_offline(&[1, 1, 1, -1, -1]).unwrap().k_hat, 4);
        let all_plus = bernoulli_cpd_offline(&[1; 6]).unwrap();
        assert_eq!(all_plus.k_hat, 6);
        assert!(all_plus.no_change);
        assert_eq!(bernoulli_cpd_offline(&[-1; 5]).unwrap().k_hat, 1);
        assert!(matches!(bernoulli_cpd_offline(&[]), Err(Error::EmptySequence)));
    }

    #[test]
    fn ties_go_to_the_smallest_index() {
        // l = [0, 1, 0, -1, 0, -1]: minimum -1 at t = 4 and t = 6
        let z = [-1, 1, 1, -1, 1, -1];
        assert_eq!(bernoulli_cpd_offline(&z).unwrap().k_hat, 4);
    }

    #[test]
    fn online_examples() {
        let n = 10;
        let stream = std::iter::repeat(1i8).take(3 * n).chain(std::iter::repeat(-1i8));
        let r = bernoulli_cpd_online(stream, n, 0.1).unwrap();
        assert_eq!(r.trigger_interval, 4);
        assert_eq!(r.k_hat, 31);
        assert_eq!(r.observed, 40);
        let r = bernoulli_cpd_online(std::iter::repeat(1i8).take(500), n, 0.1);
        assert!(matches!(r, Err(Error::StreamExhausted { observed: 500 })));
    }

    #[test]
    fn deterministic_bits_locate_the_change_exactly() {
        for k in 1..30usize {
            let z: Vec<i8> = (0..40).map(|j| if j < k { 1 } else { -1 }).collect();
            assert_eq!(bernoulli_cpd_offline(&z).unwrap().k_hat, k + 1);
        }
    }

    #[test]
    fn disjoint_pair_offline() {
        let p = DiscreteDistribution::bernoulli(1.0).unwrap();
        let q = DiscreteDistribution::bernoulli(0.0).unwrap();
        let det = BlockDetector::new(&p, &q, 0.5, SearchBudget::default(), &mut seeded(0)).unwrap();
        let b = det.block_size;
        assert!(b >= 2 && b <= 20, "{b}");
        let mut rng = seeded(5);
        let mut ok = 0;
        for _ in 0..200 {
            let data = planted_stream(&p, &q, 200, 400, &mut rng);
            let r = offline_cpd(&det, &data, 0.1, &mut rng).unwrap();
            assert_eq!(r.k_hat % b, 0);
            if r.k_hat.abs_diff(200) <= 2 * b {
                ok += 1;
            }
        }
        assert!(ok >= 180, "{ok}");
    }

    #[test]
    fn too_few_blocks() {
        let p = DiscreteDistribution::bernoulli(0.9).unwrap();
        let q = DiscreteDistribution::bernoulli(0.1).unwrap();
        let det = BlockDetector::with_block_size(&p, &q, 0.2, 50).unwrap();
        let data = planted_stream(&p, &q, 40, 90, &mut seeded(1));
        assert!(matches!(offline_cpd(&det, &data, 0.1, &mut seeded(2)), Err(Error::TooFewBlocks { blocks: 1, .. })));
    }

    struct AlwaysPlus;
    impl GofTester for AlwaysPlus {
        fn block_size(&self) -> usize {
            5
        }
        fn test_block(&self, _: &[usize], _: &mut dyn RngCore) -> i8 {
            1
        }
    }

    #[test]
    fn constant_tester_breaks_the_contract() {
        let p = DiscreteDistribution::from_weights(vec![0.25; 4]).unwrap();
        let data = Dataset::from(vec![0; 40]);
        let r = gof_cpd(&p, 0.3, &data, 0.1, &AlwaysPlus, None, 300, &mut seeded(3));
        assert!(matches!(r, Err(Error::TesterContractViolation { side: "the alternative", .. })));
    }

    #[test]
    fn probe_is_at_the_requested_distance() {
        let p = DiscreteDistribution::from_weights(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let probe = gof_probe(&p, 0.3).unwrap();
        let tv = crate::dist::total_variation(&p, &probe).unwrap();
        assert!((tv - 0.3).abs() < 1e-12);
    }
}
