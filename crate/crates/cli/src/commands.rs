use std::path::Path;

use anyhow::{Context, Result};
use privtest_core::changepoint::{gof_cpd, planted_stream, BlockDetector, NcllrTester};
use privtest_core::coupling::coupling_cost_bound_sqrt2;
use privtest_core::dist::Sampler;
use privtest_core::experiments::{
    bench_cpd, bench_sample_complexity, emit_clamp_figure, figure_one, BenchConfig, ClampFigure, ClampRow,
};
use privtest_core::rng::{seeded, split};
use privtest_core::{
    coupling_cost_bound, offline_cpd, online_cpd, run_test, sample_complexity_search, sample_coupling, theoretical_sc,
    total_variation, trim_pair, wasserstein_exact, AdvantageEstimate, Dataset, DiscreteDistribution, Error,
    Orientation, PrivateTest, SearchBudget, TrimmedPair,
};
use serde::{Deserialize, Serialize};

use crate::output::{emit, Report};
use crate::{BenchKind, Cli, Command, CpdMode, KindArg, PairArgs};

const COUPLE_TRIALS: u64 = 10_000;
const BENCH_TRIALS: u64 = 25_000;

pub fn run(cli: &Cli) -> Result<()> {
    let report = match &cli.command {
        Command::Trim { pair } => trim(pair)?,
        Command::Test { pair, data, kind, kappa } => test(cli, pair, data, *kind, *kappa)?,
        Command::Sc { pair, kind, target } => sc(cli, pair, *kind, *target)?,
        Command::Couple { pair, n } => couple(cli, pair, *n)?,
        Command::Cpd { .. } => cpd(cli)?,
        Command::Bench { .. } => bench(cli)?,
        Command::Figure { p, q, eps, grid } => figure(p.as_deref(), q.as_deref(), *eps, *grid)?,
    };
    emit(cli, &report)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_dist(path: &Path) -> Result<DiscreteDistribution> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing distribution {}", path.display()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Label {
    Str(String),
    Int(i64),
}

fn read_dataset(path: &Path, dist: &DiscreteDistribution) -> Result<Dataset> {
    let labels: Vec<Label> =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing dataset {}", path.display()))?;
    let labels: Vec<String> = labels
        .into_iter()
        .map(|l| match l {
            Label::Str(s) => s,
            Label::Int(i) => i.to_string(),
        })
        .collect();
    Dataset::from_labels(dist, &labels).with_context(|| format!("resolving dataset {}", path.display()))
}

fn read_pair(pair: &PairArgs) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    let p = read_dist(&pair.p)?;
    let q = read_dist(&pair.q)?;
    p.check_same_support(&q).context("P and Q")?;
    if !(pair.eps > 0.0 && pair.eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {}", pair.eps)).into());
    }
    Ok((p, q))
}

fn search_budget(cli: &Cli) -> SearchBudget {
    let mut budget = match cli.trials {
        Some(t) => SearchBudget { trials: t.max(1), max_trials: 4 * t.max(1), ..SearchBudget::default() },
        None => SearchBudget::default(),
    };
    if let Some(max_n) = cli.budget {
        budget.max_n = max_n;
    }
    budget
}

fn build_test(
    kind: KindArg,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    trimmed: &TrimmedPair,
    kappa: f64,
) -> Result<PrivateTest> {
    Ok(match kind {
        KindArg::Ncllr => PrivateTest::ncllr(trimmed),
        KindArg::Scllr => PrivateTest::scllr(trimmed),
        KindArg::Sllr => PrivateTest::sllr(p, q)?,
        KindArg::Llr => PrivateTest::llr_threshold(p, q, kappa)?,
    })
}

#[derive(Serialize)]
struct TrimReport<'a> {
    #[serde(flatten)]
    trimmed: &'a TrimmedPair,
    /// Clamp interval of the log-ratio in the caller's frame.
    clamp_low: f64,
    clamp_high: f64,
    hellinger_sq_prime: Option<f64>,
}

/// One support point of the trimmed pair, oriented as in the JSON output.
#[derive(Serialize)]
struct TrimRow<'a> {
    label: &'a str,
    set: String,
    p: f64,
    q: f64,
    p_tilde: f64,
    q_tilde: f64,
    p_prime: Option<f64>,
    q_prime: Option<f64>,
    p_double: Option<f64>,
    q_double: Option<f64>,
    orientation: Orientation,
    eps: f64,
    eps_prime: f64,
    tau: f64,
}

fn trim(pair: &PairArgs) -> Result<Report> {
    let (p, q) = read_pair(pair)?;
    let t = trim_pair(&p, &q, pair.eps)?;
    let (clamp_low, clamp_high) = t.caller_clamp_bounds();
    let at = |d: &Option<DiscreteDistribution>, i: usize| d.as_ref().map(|d| d.weight(i));
    let membership = t.membership();
    let rows: Vec<TrimRow> = (0..t.p.len())
        .map(|i| TrimRow {
            label: &t.p.labels()[i],
            set: membership[i].to_string(),
            p: t.p.weight(i),
            q: t.q.weight(i),
            p_tilde: t.p_tilde.weights()[i],
            q_tilde: t.q_tilde.weights()[i],
            p_prime: at(&t.p_prime, i),
            q_prime: at(&t.q_prime, i),
            p_double: at(&t.p_double, i),
            q_double: at(&t.q_double, i),
            orientation: t.orientation,
            eps: t.eps,
            eps_prime: t.eps_prime,
            tau: t.tau,
        })
        .collect();
    let report = TrimReport { trimmed: &t, clamp_low, clamp_high, hellinger_sq_prime: t.hellinger_sq_prime() };
    Report::table(&report, &rows)
}

#[derive(Serialize)]
struct TestReport {
    kind: &'static str,
    eps: f64,
    n: usize,
    verdict: &'static str,
    accept_prob: f64,
    reject_prob: f64,
    claimed_eps: f64,
    clamp_low: f64,
    clamp_high: f64,
    tau: f64,
    eps_prime: f64,
    seed: u64,
}

fn test(cli: &Cli, pair: &PairArgs, data: &Path, kind: KindArg, kappa: f64) -> Result<Report> {
    let (p, q) = read_pair(pair)?;
    let x = read_dataset(data, &p)?;
    let trimmed = trim_pair(&p, &q, pair.eps)?;
    let test = build_test(kind, &p, &q, &trimmed, kappa)?;
    let verdict = run_test(&test, &x, &mut seeded(cli.seed()));
    let (clamp_low, clamp_high) = test.bounds();
    Report::single(&TestReport {
        kind: test.kind().name(),
        eps: pair.eps,
        n: x.len(),
        verdict: verdict.as_str(),
        accept_prob: test.accept_prob(&x),
        reject_prob: test.reject_prob(&x),
        claimed_eps: test.claimed_eps(),
        clamp_low,
        clamp_high,
        tau: trimmed.tau,
        eps_prime: trimmed.eps_prime,
        seed: cli.seed(),
    })
}

#[derive(Serialize)]
struct ScReport {
    kind: &'static str,
    eps: f64,
    target: f64,
    n_star: u64,
    band: (u64, u64),
    resolved: bool,
    /// `1 / (eps tau + (1 - tau) H^2(P', Q'))`, the order of the optimal sample complexity.
    theoretical: Option<f64>,
    /// `n_star / theoretical`.
    ratio: Option<f64>,
    advantage: AdvantageEstimate,
    evaluations: usize,
}

fn sc(cli: &Cli, pair: &PairArgs, kind: KindArg, target: f64) -> Result<Report> {
    let (p, q) = read_pair(pair)?;
    let trimmed = trim_pair(&p, &q, pair.eps)?;
    let theoretical = match theoretical_sc(&trimmed) {
        Ok(t) => Some(t),
        Err(Error::DegeneratePair) => return Err(Error::DegeneratePair.into()),
        Err(_) => None,
    };
    let test = build_test(kind, &p, &q, &trimmed, 0.0)?;
    let found = sample_complexity_search(&test, &p, &q, target, search_budget(cli), &mut seeded(cli.seed()))?;
    Report::single(&ScReport {
        kind: test.kind().name(),
        eps: pair.eps,
        target,
        n_star: found.n_star,
        band: found.band,
        resolved: found.resolved,
        theoretical,
        ratio: theoretical.map(|t| found.n_star as f64 / t),
        advantage: found.advantage,
        evaluations: found.evaluations,
    })
}

#[derive(Serialize)]
struct CoupleReport {
    eps: f64,
    n: usize,
    trials: u64,
    mean_cost: f64,
    std_error: f64,
    mean_hamming: f64,
    tau: f64,
    eps_prime: f64,
    /// `eps tau n + sqrt((1 - tau) n) H(P', Q')`; `None` when `tau = 1`.
    bound: Option<f64>,
    /// The same with the `sqrt 2` factor of the Hellinger bound on total variation.
    bound_sqrt2: Option<f64>,
    /// Exact `W_{d_eps}(P^n, Q^n)` when `|X|^n` is small enough to enumerate.
    wasserstein: Option<f64>,
    /// Upper bound on the advantage of any eps-DP test at this `n`.
    advantage_ceiling: f64,
    ceiling_source: &'static str,
    seed: u64,
}

fn couple(cli: &Cli, pair: &PairArgs, n: usize) -> Result<Report> {
    let (p, q) = read_pair(pair)?;
    let trimmed = trim_pair(&p, &q, pair.eps)?;
    let trials = cli.trials.unwrap_or(COUPLE_TRIALS).max(1);
    let mut rng = seeded(cli.seed());
    let (mut sum, mut sum_sq, mut hamming) = (0.0, 0.0, 0.0);
    for _ in 0..trials {
        let t = sample_coupling(&trimmed, n, &mut rng)?;
        sum += t.cost;
        sum_sq += t.cost * t.cost;
        hamming += t.hamming as f64;
    }
    let m = trials as f64;
    let mean_cost = sum / m;
    let var = if trials > 1 { ((sum_sq - m * mean_cost * mean_cost) / (m - 1.0)).max(0.0) } else { 0.0 };
    let wasserstein = match wasserstein_exact(&p, &q, n, pair.eps) {
        Ok(sol) => Some(sol.value),
        Err(Error::EnumerationBudget { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    // An eps-DP test has advantage at most 2 W, and any coupling's expected cost is at least W.
    let (advantage_ceiling, ceiling_source) = match wasserstein {
        Some(w) => ((2.0 * w).min(1.0), "wasserstein"),
        None => ((2.0 * mean_cost).min(1.0), "coupling"),
    };
    Report::single(&CoupleReport {
        eps: pair.eps,
        n,
        trials,
        mean_cost,
        std_error: (var / m).sqrt(),
        mean_hamming: hamming / m,
        tau: trimmed.tau,
        eps_prime: trimmed.eps_prime,
        bound: coupling_cost_bound(&trimmed, n as u64).ok(),
        bound_sqrt2: coupling_cost_bound_sqrt2(&trimmed, n as u64).ok(),
        wasserstein,
        advantage_ceiling,
        ceiling_source,
        seed: cli.seed(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamSource {
    k_star: usize,
    seed: u64,
}

#[derive(Serialize)]
struct CpdDiagnostics {
    beta: f64,
    no_change: bool,
    /// Samples read (offline) or drawn at most (online).
    input_len: Option<u64>,
    /// Raw samples the online detector consumed.
    observed_samples: Option<u64>,
    k_star: Option<usize>,
    abs_error: Option<u64>,
    z_sequence: Vec<i8>,
}

#[derive(Serialize)]
struct CpdReport {
    mode: &'static str,
    k_hat: usize,
    block_size: usize,
    /// Block-level bits consumed by the online detector.
    observed: Option<u64>,
    diagnostics: CpdDiagnostics,
}

fn cpd(cli: &Cli) -> Result<Report> {
    let Command::Cpd {
        pair,
        beta,
        mode,
        data,
        stream,
        length,
        max_samples,
        interval,
        block_size,
        gamma,
        calibration,
    } = &cli.command
    else {
        unreachable!("dispatched on Command::Cpd")
    };
    let (p, q) = read_pair(pair)?;
    let detector = match block_size {
        Some(b) => BlockDetector::with_block_size(&p, &q, pair.eps, *b)?,
        None => BlockDetector::new(&p, &q, pair.eps, search_budget(cli), &mut split(cli.seed(), 0))?,
    };
    let mut rng = split(cli.seed(), 1);
    let source = match stream {
        Some(path) => Some(
            serde_json::from_str::<StreamSource>(&read_text(path)?)
                .with_context(|| format!("parsing stream source {}", path.display()))?,
        ),
        None => None,
    };
    let k_star = source.as_ref().map(|s| s.k_star);
    let offline_data = || -> Result<Dataset> {
        match (data, &source) {
            (Some(path), _) => read_dataset(path, &p),
            (None, Some(s)) => {
                let len = length.unwrap_or(2 * s.k_star);
                Ok(planted_stream(&p, &q, s.k_star, len, &mut seeded(s.seed)))
            }
            (None, None) => unreachable!("clap requires --data or --stream"),
        }
    };
    let (result, input_len) = match mode {
        CpdMode::Offline => {
            let x = offline_data()?;
            (offline_cpd(&detector, &x, *beta, &mut rng)?, x.len() as u64)
        }
        CpdMode::Gof => {
            let x = offline_data()?;
            // Without --gamma the tester is checked against Q itself, the alternative it was built for.
            let probe = if gamma.is_some() { None } else { Some(&q) };
            let g = match gamma {
                Some(g) => *g,
                None => total_variation(&p, &q)?,
            };
            let tester = NcllrTester(detector.clone());
            (gof_cpd(&p, g, &x, *beta, &tester, probe, *calibration, &mut rng)?, x.len() as u64)
        }
        CpdMode::Online => match (data, &source) {
            (Some(path), _) => {
                let x = read_dataset(path, &p)?;
                let len = x.len() as u64;
                (online_cpd(&detector, x.entries().to_vec(), *interval, *beta, &mut rng)?, len)
            }
            (None, Some(s)) => {
                let (sp, sq) = (Sampler::new(p.weights()), Sampler::new(q.weights()));
                let mut srng = seeded(s.seed);
                let k = s.k_star;
                let samples = (0..*max_samples as usize).map(move |i| if i < k { sp.draw(&mut srng) } else { sq.draw(&mut srng) });
                (online_cpd(&detector, samples, *interval, *beta, &mut rng)?, *max_samples)
            }
            (None, None) => unreachable!("clap requires --data or --stream"),
        },
    };
    let mode_name = match mode {
        CpdMode::Offline => "offline",
        CpdMode::Online => "online",
        CpdMode::Gof => "gof",
    };
    Report::single(&CpdReport {
        mode: mode_name,
        k_hat: result.k_hat,
        block_size: result.block_size,
        observed: result.observed,
        diagnostics: CpdDiagnostics {
            beta: result.beta,
            no_change: result.no_change,
            input_len: Some(input_len),
            observed_samples: result.observed_samples,
            k_star,
            abs_error: k_star.map(|k| result.k_hat.abs_diff(k) as u64),
            z_sequence: result.z_sequence,
        },
    })
}

fn bench(cli: &Cli) -> Result<Report> {
    let Command::Bench { what, config, family, alphas, epsilons, betas } = &cli.command else {
        unreachable!("dispatched on Command::Bench")
    };
    let mut cfg = match config {
        Some(path) => serde_json::from_str::<BenchConfig>(&read_text(path)?)
            .with_context(|| format!("parsing bench config {}", path.display()))?,
        None => {
            let family = family.ok_or_else(|| Error::InvalidParameter("either --config or --family is required".into()))?;
            BenchConfig::new(family.into(), alphas.clone(), epsilons.clone(), cli.trials.unwrap_or(BENCH_TRIALS), cli.seed())
        }
    };
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(max_n) = cli.budget {
        cfg.max_n = max_n;
    }
    if !betas.is_empty() {
        cfg.betas = betas.clone();
    }
    match what {
        BenchKind::Sc => {
            let rows = bench_sample_complexity(&cfg)?;
            Report::table(&rows, &rows)
        }
        BenchKind::Cpd => {
            let rows = bench_cpd(&cfg)?;
            Report::table(&rows, &rows)
        }
    }
}

/// A figure row with the figure-wide totals repeated, for flat CSV output.
#[derive(Serialize)]
struct FigureRow<'a> {
    #[serde(flatten)]
    row: &'a ClampRow,
    eps: f64,
    blue_area: f64,
    red_area: f64,
    tau: f64,
}

fn figure(p: Option<&Path>, q: Option<&Path>, eps: f64, grid: usize) -> Result<Report> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")).into());
    }
    let fig: ClampFigure = match (p, q) {
        (Some(p), Some(q)) => {
            let (p, q) = (read_dist(p)?, read_dist(q)?);
            emit_clamp_figure(&p, &q, eps)?
        }
        _ => figure_one(grid, eps)?,
    };
    let rows: Vec<FigureRow> = fig
        .rows
        .iter()
        .map(|row| FigureRow { row, eps: fig.eps, blue_area: fig.blue_area, red_area: fig.red_area, tau: fig.tau })
        .collect();
    Report::table(&fig, &rows)
}
