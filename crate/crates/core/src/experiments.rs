//! Benchmark families, sweeps and figure data.
//!
//! Every sweep is a grid of independent cells. Cells run in parallel, each on
//! its own stream `split(seed, cell_index)`, and rows come back in grid order,
//! so output depends only on the config.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{sample_complexity_search, theoretical_sc, SearchBudget};
use crate::changepoint::{offline_cpd, planted_stream, BlockDetector};
use crate::dist::{hockey_stick_weights, total_variation, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::hypothesis::PrivateTest;
use crate::rng::split;
use crate::trim::{compute_tau, trim_pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `Ber((1 + a)/2)` against `Ber((1 - a)/2)`.
    BernoulliPair,
    /// `Ber(0)` against `Ber(a)`.
    BernoulliZero,
    /// `P = (0, 1/2, 1/2)`, `Q = (2a^1.5, 1/2 + a - a^1.5, 1/2 - a - a^1.5)`.
    ThreePoint,
    /// A fixed pair supplied in the config; `alpha` is only a row label.
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::BernoulliPair => "bernoulli-pair",
            Family::BernoulliZero => "bernoulli-zero",
            Family::ThreePoint => "three-point",
            Family::Custom => "custom",
        }
    }

    /// The pair at parameter `alpha`. `Custom` has no built-in pair.
    pub fn pair(self, alpha: f64) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
        let bad = || Error::InvalidParameter(format!("alpha {alpha} is out of range for {}", self.name()));
        if !(alpha > 0.0) {
            return Err(bad());
        }
        match self {
            Family::BernoulliPair => {
                if alpha > 1.0 {
                    return Err(bad());
                }
                Ok((DiscreteDistribution::bernoulli((1.0 + alpha) / 2.0)?, DiscreteDistribution::bernoulli((1.0 - alpha) / 2.0)?))
            }
            Family::BernoulliZero => {
                if alpha > 1.0 {
                    return Err(bad());
                }
                Ok((DiscreteDistribution::bernoulli(0.0)?, DiscreteDistribution::bernoulli(alpha)?))
            }
            Family::ThreePoint => {
                let a15 = alpha.powf(1.5);
                let last = 0.5 - alpha - a15;
                if last < 0.0 {
                    return Err(bad());
                }
                let p = DiscreteDistribution::from_weights(vec![0.0, 0.5, 0.5])?;
                let q = p.with_weights(vec![2.0 * a15, 0.5 + alpha - a15, last])?;
                Ok((p, q))
            }
            Family::Custom => Err(Error::InvalidParameter("the custom family needs an explicit pair".into())),
        }
    }

    /// Order-of-magnitude sample complexity predicted for the family.
    /// `None` for `Custom`.
    pub fn formula(self, alpha: f64, eps: f64) -> Option<f64> {
        let pair = 1.0 / (alpha * alpha) + 1.0 / (alpha * eps);
        match self {
            Family::BernoulliPair => Some(pair),
            Family::BernoulliZero => Some(1.0 / alpha + 1.0 / (alpha * eps)),
            Family::ThreePoint => Some(pair.min(1.0 / (alpha.powf(1.5) * eps))),
            Family::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub family: Family,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Failure levels for the change-point sweep.
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    /// Monte Carlo trials per advantage evaluation, and runs per change-point cell.
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_max_n")]
    pub max_n: u64,
    /// The change is planted at `k_star_blocks * B`, in a stream of twice that length.
    #[serde(default = "default_k_star_blocks")]
    pub k_star_blocks: usize,
    /// Block size used when the search cannot size blocks, e.g. for `P = Q`.
    #[serde(default = "default_fallback_block")]
    pub fallback_block_size: usize,
    #[serde(default)]
    pub custom: Option<(DiscreteDistribution, DiscreteDistribution)>,
}

fn default_betas() -> Vec<f64> {
    vec![0.1]
}

fn default_max_n() -> u64 {
    SearchBudget::default().max_n
}

fn default_k_star_blocks() -> usize {
    10
}

fn default_fallback_block() -> usize {
    16
}

impl BenchConfig {
    pub fn new(family: Family, alphas: Vec<f64>, epsilons: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            family,
            alphas,
            epsilons,
            betas: default_betas(),
            trials,
            seed,
            max_n: default_max_n(),
            k_star_blocks: default_k_star_blocks(),
            fallback_block_size: default_fallback_block(),
            custom: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.alphas.is_empty() || self.epsilons.is_empty() || self.betas.is_empty() {
            return fail("parameter grids must be nonempty");
        }
        if self.trials < 1 {
            return fail("trials must be at least 1");
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return fail("eps values must be positive and finite");
        }
        if self.betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return fail("beta values must lie in (0, 1)");
        }
        if self.k_star_blocks < 1 || self.fallback_block_size < 1 {
            return fail("k_star_blocks and fallback_block_size must be at least 1");
        }
        match (self.family, &self.custom) {
            (Family::Custom, None) => return fail("the custom family needs a pair"),
            (Family::Custom, Some((p, q))) => p.check_same_support(q)?,
            (f, _) => {
                for &a in &self.alphas {
                    f.pair(a)?;
                }
            }
        }
        Ok(())
    }

    fn pair(&self, alpha: f64) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
        match (&self.family, &self.custom) {
            (Family::Custom, Some((p, q))) => Ok((p.clone(), q.clone())),
            (f, _) => f.pair(alpha),
        }
    }

    fn budget(&self) -> SearchBudget {
        SearchBudget { max_n: self.max_n, trials: self.trials, max_trials: 4 * self.trials }
    }
}

/// One cell of the sample-complexity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScRow {
    pub family: String,
    pub alpha: f64,
    pub eps: f64,
    /// Smallest accepted `n` for ncLLR at target 2/3; `None` if the budget ran out.
    pub n_star: Option<u64>,
    pub theory: Option<f64>,
    pub formula: Option<f64>,
    /// `n_star / formula`.
    pub ratio: Option<f64>,
    /// Empty, or `unresolved` / `budget-exceeded` / `degenerate`.
    pub flag: String,
}

pub const SC_TARGET: f64 = 2.0 / 3.0;

fn grid2(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

/// ncLLR sample complexity on every `(alpha, eps)` cell.
pub fn bench_sample_complexity(config: &BenchConfig) -> Result<Vec<ScRow>> {
    config.validate()?;
    let cells = grid2(&config.alphas, &config.epsilons);
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(alpha, eps))| {
            let (p, q) = config.pair(alpha)?;
            let trimmed = trim_pair(&p, &q, eps)?;
            let test = PrivateTest::ncllr(&trimmed);
            let theory = theoretical_sc(&trimmed).ok();
            let formula = config.family.formula(alpha, eps);
            let mut rng = split(config.seed, idx as u64);
            let (n_star, flag) = match sample_complexity_search(&test, &p, &q, SC_TARGET, config.budget(), &mut rng) {
                Ok(r) => (Some(r.n_star), if r.resolved { String::new() } else { "unresolved".to_string() }),
                Err(Error::BudgetExceeded { .. }) => (None, "budget-exceeded".to_string()),
                Err(e) => return Err(e),
            };
            let flag = if theory.is_none() { "degenerate".to_string() } else { flag };
            Ok(ScRow {
                family: config.family.name().to_string(),
                alpha,
                eps,
                n_star,
                theory,
                formula,
                ratio: n_star.zip(formula).map(|(n, f)| n as f64 / f),
                flag,
            })
        })
        .collect()
}

/// One cell of the change-point sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpdRow {
    pub family: String,
    pub alpha: f64,
    pub eps: f64,
    pub beta: f64,
    pub block_size: usize,
    pub k_star: usize,
    pub runs: u64,
    pub q50: f64,
    pub q90: f64,
    /// Error quantile at level `1 - beta`.
    pub q_beta: f64,
    pub max: f64,
    /// `q90 / block_size`.
    pub c90: f64,
    /// Empty, or `no-signal` when `P = Q` / the search could not size blocks.
    pub flag: String,
}

/// Nearest-rank quantile of an ascending slice.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (level * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Offline change-point error quantiles on every `(alpha, eps, beta)` cell.
pub fn bench_cpd(config: &BenchConfig) -> Result<Vec<CpdRow>> {
    config.validate()?;
    let cells: Vec<(f64, f64, f64)> = grid2(&config.alphas, &config.epsilons)
        .into_iter()
        .flat_map(|(a, e)| config.betas.iter().map(move |&b| (a, e, b)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(alpha, eps, beta))| {
            let (p, q) = config.pair(alpha)?;
            let mut rng = split(config.seed, idx as u64);
            let signal = total_variation(&p, &q)? > 0.0;
            let searched = if signal { BlockDetector::new(&p, &q, eps, config.budget(), &mut rng).ok() } else { None };
            let (detector, flag) = match searched {
                Some(d) => (d, String::new()),
                None => (BlockDetector::with_block_size(&p, &q, eps, config.fallback_block_size)?, "no-signal".to_string()),
            };
            let b = detector.block_size;
            let k_star = config.k_star_blocks * b;
            let mut errors = Vec::with_capacity(config.trials as usize);
            for _ in 0..config.trials {
                let data = planted_stream(&p, &q, k_star, 2 * k_star, &mut rng);
                let r = offline_cpd(&detector, &data, beta, &mut rng)?;
                errors.push(r.k_hat.abs_diff(k_star) as f64);
            }
            errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q90 = quantile(&errors, 0.9);
            Ok(CpdRow {
                family: config.family.name().to_string(),
                alpha,
                eps,
                beta,
                block_size: b,
                k_star,
                runs: config.trials,
                q50: quantile(&errors, 0.5),
                q90,
                q_beta: quantile(&errors, 1.0 - beta),
                max: *errors.last().unwrap(),
                c90: q90 / b as f64,
                flag,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClampRow {
    pub index: usize,
    pub label: String,
    pub p: f64,
    pub exp_eps_p: f64,
    pub q: f64,
    pub exp_eps_q: f64,
    /// `max(P - e^eps Q, 0)`.
    pub blue: f64,
    /// `max(Q - e^eps P, 0)`.
    pub red: f64,
}

/// Per-point data behind the picture of `tau` as the larger of two excess areas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClampFigure {
    pub eps: f64,
    pub rows: Vec<ClampRow>,
    pub blue_area: f64,
    pub red_area: f64,
    pub tau: f64,
    pub note: String,
}

pub fn emit_clamp_figure(p: &DiscreteDistribution, q: &DiscreteDistribution, eps: f64) -> Result<ClampFigure> {
    let (tau, _) = compute_tau(p, q, eps)?;
    let e = eps.exp();
    let rows = p
        .labels()
        .iter()
        .zip(p.weights().iter().zip(q.weights()))
        .enumerate()
        .map(|(index, (label, (&pw, &qw)))| ClampRow {
            index,
            label: label.clone(),
            p: pw,
            exp_eps_p: e * pw,
            q: qw,
            exp_eps_q: e * qw,
            blue: (pw - e * qw).max(0.0),
            red: (qw - e * pw).max(0.0),
        })
        .collect();
    Ok(ClampFigure {
        eps,
        rows,
        blue_area: hockey_stick_weights(p.weights(), q.weights(), e),
        red_area: hockey_stick_weights(q.weights(), p.weights(), e),
        tau,
        note: "point masses; areas are sums over the support".to_string(),
    })
}

/// `P(x) = 2x` and `Q(x)` proportional to `1 / (1 + sqrt x)` on the midpoints of
/// `points` equal cells of `[0, 1]`, each normalized to sum 1.
pub fn figure_one_grid(points: usize) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if points == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    let xs: Vec<f64> = (0..points).map(|i| (i as f64 + 0.5) / points as f64).collect();
    let labels: Vec<String> = xs.iter().map(|x| format!("{x:.6}")).collect();
    let normalize = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|w| w / s).collect::<Vec<_>>()
    };
    let p = DiscreteDistribution::new(labels.clone(), normalize(xs.iter().map(|x| 2.0 * x).collect()))?;
    let q = DiscreteDistribution::new(labels, normalize(xs.iter().map(|x| 1.0 / (1.0 + x.sqrt())).collect()))?;
    Ok((p, q))
}

/// The clamp figure on [`figure_one_grid`], labelled with the normalization used.
pub fn figure_one(points: usize, eps: f64) -> Result<ClampFigure> {
    let (p, q) = figure_one_grid(points)?;
    let mut fig = emit_clamp_figure(&p, &q, eps)?;
    fig.note = format!(
        "densities P(x)=2x and Q(x)~1/(1+sqrt x) at {points} cell midpoints of [0,1], multiplied by the cell width and renormalized to sum 1"
    );
    Ok(fig)
}
