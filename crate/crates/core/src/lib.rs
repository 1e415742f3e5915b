//! Differentially private simple hypothesis testing over finite distributions.
//!
//! Given two fully specified distributions `P` and `Q` on a finite support and
//! a privacy level `eps`, this crate computes the trimmed pair behind the
//! optimal private test ([`trim`]), evaluates the clamped likelihood-ratio
//! tests exactly ([`hypothesis`]), measures their advantage and sample
//! complexity ([`advantage`]), samples the coupling and transport quantities
//! that bound every private test from above ([`coupling`], [`flow`]), and runs
//! private change-point detection on top of those tests ([`changepoint`]).
//!
//! Everything is exact arithmetic over enumerated supports where that is
//! affordable, and seeded Monte Carlo otherwise. All randomness goes through
//! [`rng::DpRng`].

pub mod advantage;
pub mod changepoint;
pub mod coupling;
pub mod dist;
pub mod enumerate;
mod error;
pub mod experiments;
pub mod flow;
pub mod hypothesis;
pub mod rng;
pub mod trim;

pub use advantage::{
    advantage_exact, advantage_mc, sample_complexity_search, scllr_advantage_closed_form, theoretical_sc,
    AdvantageEstimate, AdvantageMethod, SearchBudget, SearchResult,
};
pub use changepoint::{
    bernoulli_cpd_offline, bernoulli_cpd_online, gof_cpd, offline_cpd, online_cpd, ChangePointResult, GofTester,
};
pub use coupling::{
    coupling_cost_bound, potential_test, sample_coupling, wasserstein_exact, CouplingTranscript, PotentialFunction,
    TransportSolution,
};
pub use dist::{
    hellinger_sq, hellinger_tensorize, hockey_stick, kl_divergence, total_variation, Dataset, DiscreteDistribution,
    DistError, SubDistribution,
};
pub use error::{Error, Result};
pub use hypothesis::{
    cllr, gap_and_variances, laplace_sample, ncllr_accept_prob, run_test, scllr_accept_prob, sllr_accept_prob,
    vargap_bound, verify_dp_exhaustive, MomentReport, PrivateTest, TestKind, TestVerdict,
};
pub use rng::DpRng;
pub use trim::{compute_tau, solve_eps_prime, trim_pair, Orientation, TrimmedPair};
