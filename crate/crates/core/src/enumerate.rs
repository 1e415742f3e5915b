//! Exhaustive enumeration of datasets and type classes.
//!
//! A dataset over a support of size `k` is encoded as a base-`k` integer with
//! the first entry as the most significant digit, so the enumeration order
//! matches [`crate::DiscreteDistribution::product`].

/// `k^n` if it fits in a `u64`.
pub fn dataset_count(k: usize, n: usize) -> Option<u64> {
    (k as u64).checked_pow(n.try_into().ok()?)
}

/// Number of count vectors of length `k` summing to `n`, i.e. `C(n + k - 1, k - 1)`,
/// as a float (it is compared against budgets, not used for indexing).
pub fn composition_count(n: u64, k: usize) -> f64 {
    if k == 0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let r = (k - 1) as u64;
    let mut acc = 1.0f64;
    for i in 1..=r {
        acc = acc * (n + i) as f64 / i as f64;
    }
    acc.round()
}

/// Base-`k` code of a dataset.
pub fn encode(entries: &[usize], k: usize) -> usize {
    entries.iter().fold(0, |acc, &e| acc * k + e)
}

/// Inverse of [`encode`] for datasets of length `n`.
pub fn decode(mut code: usize, k: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = code % k;
        code /= k;
    }
    out
}

/// Odometer over all `k^n` datasets, in code order.
#[derive(Debug, Clone)]
pub struct DatasetIter {
    k: usize,
    current: Vec<usize>,
    done: bool,
}

impl DatasetIter {
    pub fn new(k: usize, n: usize) -> Self {
        Self {
            k,
            current: vec![0; n],
            done: k == 0 && n > 0,
        }
    }
}

impl Iterator for DatasetIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut i = self.current.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.current[i] += 1;
            if self.current[i] < self.k {
                break;
            }
            self.current[i] = 0;
        }
        Some(out)
    }
}

/// Visit every count vector of length `k` with entries summing to `n`.
pub fn for_each_composition<F: FnMut(&[u64])>(n: u64, k: usize, mut f: F) {
    if k == 0 {
        if n == 0 {
            f(&[]);
        }
        return;
    }
    let mut counts = vec![0u64; k];
    fn rec<F: FnMut(&[u64])>(counts: &mut [u64], i: usize, left: u64, f: &mut F) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(counts, i + 1, left - c, f);
        }
    }
    rec(&mut counts, 0, n, &mut f);
}

/// Table of `ln(m!)` for `m = 0..=n`.
pub fn ln_factorials(n: u64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n as usize + 1);
    t.push(0.0);
    let mut acc = 0.0;
    for m in 1..=n {
        acc += (m as f64).ln();
        t.push(acc);
    }
    t
}

/// `ln` of the multinomial coefficient `n! / prod c_i!`.
pub fn ln_multinomial(counts: &[u64], ln_fact: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    ln_fact[n as usize] - counts.iter().map(|&c| ln_fact[c as usize]).sum::<f64>()
}

/// `sum_i c_i ln w_i`, with `0 * ln 0 = 0`.
pub fn ln_prob_counts(counts: &[u64], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&c, &w) in counts.iter().zip(weights) {
        if c > 0 {
            s += c as f64 * w.ln();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odometer_visits_all_codes_in_order() {
        let all: Vec<_> = DatasetIter::new(3, 2).collect();
        assert_eq!(all.len(), 9);
        for (code, x) in all.iter().enumerate() {
            assert_eq!(encode(x, 3), code);
            assert_eq!(&decode(code, 3, 2), x);
        }
        assert_eq!(DatasetIter::new(4, 0).count(), 1);
    }

    #[test]
    fn compositions_are_counted_correctly() {
        for (n, k) in [(0u64, 3usize), (5, 1), (4, 3), (7, 4)] {
            let mut seen = 0;
            for_each_composition(n, k, |c| {
                assert_eq!(c.iter().sum::<u64>(), n);
                seen += 1;
            });
            assert_eq!(seen as f64, composition_count(n, k));
        }
    }

    #[test]
    fn multinomial_weights_sum_to_one() {
        let w = [0.2, 0.5, 0.3];
        let lf = ln_factorials(6);
        let mut total = 0.0;
        for_each_composition(6, 3, |c| total += (ln_multinomial(c, &lf) + ln_prob_counts(c, &w)).exp());
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts_overflow_is_reported() {
        assert_eq!(dataset_count(2, 10), Some(1024));
        assert_eq!(dataset_count(10, 30), None);
    }
}
