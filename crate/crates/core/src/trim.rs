//! The trimmed pair: `tau`, `eps'`, the clipped sub-distributions and the
//! `S`/`T`/`A` partition.
//!
//! Everything in a [`TrimmedPair`] is stored in the *oriented* frame, in which
//! `P` is the side whose hockey-stick excess over `e^eps Q` is the larger one.
//! When the caller's `Q` has the larger excess the two inputs are swapped and
//! [`Orientation::QSide`] is recorded; the `caller_*` accessors undo the swap.

use serde::Serialize;

use crate::dist::{hockey_stick_weights, DiscreteDistribution, SubDistribution};
use crate::error::{Error, Result};

/// Bisection tolerance on `phi(y) >= tau - tol`.
pub const EPS_PRIME_TOL: f64 = 1e-12;

/// Above this `tau` the normalized `P'`/`Q'` are not formed.
pub const TAU_ONE_TOL: f64 = 1e-9;

/// Below this `tau` the residuals `P''`/`Q''` are not formed.
pub const TAU_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `D(P || Q) >= D(Q || P)`; no swap.
    PSide,
    /// `D(Q || P) > D(P || Q)`; inputs were swapped.
    QSide,
}

/// `tau = max(D_{e^eps}(P||Q), D_{e^eps}(Q||P))` and which side attains it (ties go to `P`).
pub fn compute_tau(p: &DiscreteDistribution, q: &DiscreteDistribution, eps: f64) -> Result<(f64, Orientation)> {
    p.check_same_support(q)?;
    check_eps(eps)?;
    Ok(tau_weights(p.weights(), q.weights(), eps))
}

fn tau_weights(p: &[f64], q: &[f64], eps: f64) -> (f64, Orientation) {
    let a = eps.exp();
    let dp = hockey_stick_weights(p, q, a);
    let dq = hockey_stick_weights(q, p, a);
    if dq > dp {
        (dq, Orientation::QSide)
    } else {
        (dp, Orientation::PSide)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")))
    }
}

/// `phi(y) = sum max(Q - e^y P, 0)`.
pub fn phi(p: &[f64], q: &[f64], y: f64) -> f64 {
    hockey_stick_weights(q, p, y.exp())
}

/// Largest `y` in `[0, eps]` with `phi(y) >= tau - tol`, for an oriented pair.
///
/// `phi` is nonincreasing, so the predicate holds on an interval `[0, y*]`
/// and bisection finds its right end.
pub fn solve_eps_prime(p: &DiscreteDistribution, q: &DiscreteDistribution, eps: f64, tau: f64, tol: f64) -> Result<f64> {
    p.check_same_support(q)?;
    check_eps(eps)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    solve_eps_prime_weights(p.weights(), q.weights(), eps, tau, tol)
}

fn solve_eps_prime_weights(p: &[f64], q: &[f64], eps: f64, tau: f64, tol: f64) -> Result<f64> {
    let target = tau - tol;
    let phi0 = phi(p, q, 0.0);
    if phi0 < target {
        return Err(Error::NoSolution { tau, phi0 });
    }
    if phi(p, q, eps) >= target {
        return Ok(eps);
    }
    let (mut lo, mut hi) = (0.0, eps);
    let max_iter = (eps / tol).log2().ceil().max(0.0) as usize + 2;
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if phi(p, q, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// The full trimming construction for `(P, Q, eps)`.
#[derive(Debug, Clone, Serialize)]
pub struct TrimmedPair {
    pub eps: f64,
    pub eps_prime: f64,
    pub tau: f64,
    pub orientation: Orientation,
    /// Oriented `P` (the caller's `Q` when `orientation` is `QSide`).
    pub p: DiscreteDistribution,
    pub q: DiscreteDistribution,
    /// `min(e^eps Q, P)`.
    pub p_tilde: SubDistribution,
    /// `min(e^eps' P, Q)`.
    pub q_tilde: SubDistribution,
    pub p_prime: Option<DiscreteDistribution>,
    pub q_prime: Option<DiscreteDistribution>,
    pub p_double: Option<DiscreteDistribution>,
    pub q_double: Option<DiscreteDistribution>,
    pub set_s: Vec<usize>,
    pub set_t: Vec<usize>,
    pub set_a: Vec<usize>,
    /// `D_{e^eps}(P || Q)` in the caller's frame.
    pub area_p_excess: f64,
    /// `D_{e^eps}(Q || P)` in the caller's frame.
    pub area_q_excess: f64,
}

/// Trim `(P, Q)` at privacy level `eps`.
pub fn trim_pair(p: &DiscreteDistribution, q: &DiscreteDistribution, eps: f64) -> Result<TrimmedPair> {
    p.check_same_support(q)?;
    check_eps(eps)?;
    let e = eps.exp();
    let area_p_excess = hockey_stick_weights(p.weights(), q.weights(), e);
    let area_q_excess = hockey_stick_weights(q.weights(), p.weights(), e);
    let (tau, orientation) = tau_weights(p.weights(), q.weights(), eps);
    let (p, q) = match orientation {
        Orientation::PSide => (p.clone(), q.clone()),
        Orientation::QSide => (q.clone(), p.clone()),
    };
    let pw = p.weights();
    let qw = q.weights();
    let eps_prime = solve_eps_prime_weights(pw, qw, eps, tau, EPS_PRIME_TOL)?;
    let ep = eps_prime.exp();

    let mut set_s = Vec::new();
    let mut set_t = Vec::new();
    let mut set_a = Vec::new();
    for i in 0..pw.len() {
        if pw[i] - e * qw[i] > 0.0 {
            set_s.push(i);
        } else if qw[i] - ep * pw[i] > 0.0 {
            set_t.push(i);
        } else {
            set_a.push(i);
        }
    }

    let pt: Vec<f64> = pw.iter().zip(qw).map(|(&a, &b)| (e * b).min(a)).collect();
    let qt: Vec<f64> = pw.iter().zip(qw).map(|(&a, &b)| (ep * a).min(b)).collect();
    let p_excess: Vec<f64> = pw.iter().zip(&pt).map(|(a, b)| (a - b).max(0.0)).collect();
    let q_excess: Vec<f64> = qw.iter().zip(&qt).map(|(a, b)| (a - b).max(0.0)).collect();

    let (p_prime, q_prime) = if tau > 1.0 - TAU_ONE_TOL {
        (None, None)
    } else {
        (Some(p.renormalized(&pt)), Some(q.renormalized(&qt)))
    };
    let residual_mass = p_excess.iter().sum::<f64>().min(q_excess.iter().sum::<f64>());
    let (p_double, q_double) = if tau < TAU_ZERO_TOL || residual_mass <= 0.0 {
        (None, None)
    } else {
        (Some(p.renormalized(&p_excess)), Some(q.renormalized(&q_excess)))
    };

    let p_tilde = SubDistribution::new(p.labels().to_vec(), pt)?;
    let q_tilde = SubDistribution::new(q.labels().to_vec(), qt)?;

    Ok(TrimmedPair {
        eps,
        eps_prime,
        tau,
        orientation,
        p,
        q,
        p_tilde,
        q_tilde,
        p_prime,
        q_prime,
        p_double,
        q_double,
        set_s,
        set_t,
        set_a,
        area_p_excess,
        area_q_excess,
    })
}

impl TrimmedPair {
    pub fn is_swapped(&self) -> bool {
        self.orientation == Orientation::QSide
    }

    /// True when `P'`/`Q'` exist (`tau < 1`).
    pub fn has_prime(&self) -> bool {
        self.p_prime.is_some()
    }

    /// The inputs in the order the caller supplied them.
    pub fn caller_pair(&self) -> (&DiscreteDistribution, &DiscreteDistribution) {
        if self.is_swapped() {
            (&self.q, &self.p)
        } else {
            (&self.p, &self.q)
        }
    }

    /// Clamp interval `[a, b]` for `log P(x)/Q(x)` in the caller's frame:
    /// `[-eps', eps]`, or `[-eps, eps']` after a swap.
    pub fn caller_clamp_bounds(&self) -> (f64, f64) {
        if self.is_swapped() {
            (-self.eps, self.eps_prime)
        } else {
            (-self.eps_prime, self.eps)
        }
    }

    /// `H^2(P', Q')`, or `None` when `tau = 1`.
    pub fn hellinger_sq_prime(&self) -> Option<f64> {
        match (&self.p_prime, &self.q_prime) {
            (Some(a), Some(b)) => Some(crate::dist::hellinger_sq_weights(a.weights(), b.weights())),
            _ => None,
        }
    }

    /// `sum max(Q - e^eps' P, 0)` in the oriented frame.
    pub fn phi_at_eps_prime(&self) -> f64 {
        phi(self.p.weights(), self.q.weights(), self.eps_prime)
    }

    /// Set membership of each support index: `'S'`, `'T'` or `'A'`.
    pub fn membership(&self) -> Vec<char> {
        let mut m = vec!['A'; self.p.len()];
        for &i in &self.set_s {
            m[i] = 'S';
        }
        for &i in &self.set_t {
            m[i] = 'T';
        }
        m
    }
}
