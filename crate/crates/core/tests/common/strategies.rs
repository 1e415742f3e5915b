use privtest_core::DiscreteDistribution;
use proptest::prelude::*;

/// Weight vectors on `k` atoms, some entries possibly zero, normalized.
pub fn dist(k: usize) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], k)
        .prop_filter("needs positive mass", |w| w.iter().sum::<f64>() > 0.0)
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            DiscreteDistribution::from_weights(w.into_iter().map(|v| v / s).collect()).unwrap()
        })
}

pub fn pair(kmin: usize, kmax: usize) -> impl Strategy<Value = (DiscreteDistribution, DiscreteDistribution)> {
    (kmin..=kmax).prop_flat_map(|k| (dist(k), dist(k)))
}

pub fn eps() -> impl Strategy<Value = f64> {
    (-3.0f64..1.2).prop_map(f64::exp)
}
