//! `privtest`: private simple hypothesis testing from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use privtest_core::experiments::Family;
use privtest_core::{DistError, Error};

use crate::output::Format;

#[derive(Parser, Debug)]
#[command(name = "privtest", version, about = "Differentially private simple hypothesis testing on finite supports")]
pub struct Cli {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Monte Carlo trials (per side for advantage estimates, per transcript batch for `couple`).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Largest sample size a search may reach.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(clap::Args, Debug)]
pub struct PairArgs {
    /// Distribution file for P: {"labels": [...], "weights": [...]}.
    #[arg(long)]
    pub p: PathBuf,
    /// Distribution file for Q.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ncllr,
    Scllr,
    Sllr,
    Llr,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CpdMode {
    Offline,
    Online,
    Gof,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Sc,
    Cpd,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trim (P, Q) at level eps.
    Trim {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Run a test on a dataset and report its exact acceptance probability.
    Test {
        #[command(flatten)]
        pair: PairArgs,
        /// Dataset file: a JSON array of labels.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Ncllr)]
        kind: KindArg,
        /// Threshold of the `llr` test.
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
    },
    /// Search for the sample complexity of a test.
    Sc {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Ncllr)]
        kind: KindArg,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        target: f64,
    },
    /// Sample the trimmed coupling and compare its cost with the bounds.
    Couple {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        n: usize,
    },
    /// Private change-point detection.
    Cpd {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = CpdMode::Offline)]
        mode: CpdMode,
        /// Dataset file (a JSON array of labels).
        #[arg(long, conflicts_with = "stream")]
        data: Option<PathBuf>,
        /// Stream source file: {"k_star": int, "seed": int}.
        #[arg(long, required_unless_present = "data")]
        stream: Option<PathBuf>,
        /// Length of a simulated stream for the offline modes (default 2 * k_star).
        #[arg(long)]
        length: Option<usize>,
        /// Cap on raw samples drawn by the online mode.
        #[arg(long, default_value_t = 10_000_000)]
        max_samples: u64,
        /// Interval length of the online detector, in blocks (default 32).
        #[arg(long, default_value_t = 32)]
        interval: usize,
        /// Skip the block-size search.
        #[arg(long)]
        block_size: Option<usize>,
        /// Distance the goodness-of-fit tester is calibrated at (default TV(P, Q)).
        #[arg(long)]
        gamma: Option<f64>,
        /// Calibration blocks per side for the goodness-of-fit mode.
        #[arg(long, default_value_t = 300)]
        calibration: usize,
    },
    /// Sweep sample complexity or change-point error over a grid.
    Bench {
        #[arg(long, value_enum, default_value_t = BenchKind::Sc)]
        what: BenchKind,
        /// Full configuration as JSON; the flags below fill in a config when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
    },
    /// Per-point data for the picture of tau as the larger of two excess areas.
    Figure {
        /// Distribution file for P; with --q, plots that pair instead of the gridded example.
        #[arg(long, requires = "q")]
        p: Option<PathBuf>,
        #[arg(long, requires = "p")]
        q: Option<PathBuf>,
        #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
        eps: f64,
        /// Grid points for the built-in example.
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    BernoulliPair,
    BernoulliZero,
    ThreePoint,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::BernoulliPair => Family::BernoulliPair,
            FamilyArg::BernoulliZero => Family::BernoulliZero,
            FamilyArg::ThreePoint => Family::ThreePoint,
        }
    }
}

/// Exit status per error class.
pub mod exit {
    pub const IO: u8 = 3;
    pub const INPUT: u8 = 4;
    pub const PARAMETER: u8 = 5;
    pub const BUDGET: u8 = 6;
    pub const DEGENERATE: u8 = 7;
    pub const CHANGE_POINT: u8 = 8;
    pub const INTERNAL: u8 = 9;
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Dist(_) => exit::INPUT,
                Error::InvalidBounds { .. } | Error::NonPositiveScale(_) | Error::InvalidParameter(_) => {
                    exit::PARAMETER
                }
                Error::EnumerationBudget { .. } | Error::BudgetExceeded { .. } => exit::BUDGET,
                Error::NoSolution { .. } | Error::UndefinedPrime | Error::DegeneratePair | Error::HypothesisViolated { .. } => {
                    exit::DEGENERATE
                }
                Error::EmptySequence
                | Error::StreamExhausted { .. }
                | Error::TooFewBlocks { .. }
                | Error::TesterContractViolation { .. } => exit::CHANGE_POINT,
                Error::NotLipschitz { .. } | Error::RangeViolation { .. } | Error::CouplingRejection(_) => exit::INTERNAL,
            };
        }
        if cause.downcast_ref::<DistError>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return exit::INPUT;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return exit::IO;
        }
    }
    exit::INTERNAL
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
