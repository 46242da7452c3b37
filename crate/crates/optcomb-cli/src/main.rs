//! `optcomb` — end-to-end pipeline for optimal linear combinations of binary
//! classifiers: train an SVM model grid with out-of-sample scoring, solve the
//! hinge-slack weight problem, evaluate the combination against the best
//! single model, and explore bias-variance decompositions of 0-1 loss.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
//! failure. Worker count is controlled by the RAYON_NUM_THREADS environment
//! variable; everything else lives in the config file or flags.

// Validation guards use `!(x > 0.0)` on purpose: unlike `x <= 0.0`, the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifact;
mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use optcomb::combine::Formulation;
use optcomb::grid::ScoreKind;

use commands::{CurveParams, OnennParams, PointParams};
use config::{parse_formulation, parse_score_kind, Overrides, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "optcomb",
    version,
    about = "Optimal linear combination of binary classifiers",
    after_help = "Pipeline: grid -> combine -> evaluate, all driven by one TOML config.\n\
                  Set RAYON_NUM_THREADS to control grid-training parallelism."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Config-file overrides shared by the pipeline verbs.
#[derive(Args, Clone, Debug, Default)]
struct OverrideArgs {
    /// Dataset file (overrides [dataset].path)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Fold count (overrides [folds].k)
    #[arg(long)]
    k: Option<usize>,
    /// Fold seed (overrides [folds].seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Combiner formulation: single_lp | bootstrap_lp | qp
    #[arg(long, value_parser = parse_formulation)]
    formulation: Option<Formulation>,
    /// Required margin (default 0.5 for the LP forms, 1.0 for the QP)
    #[arg(long)]
    margin: Option<f64>,
    /// Per-weight cap (LP forms)
    #[arg(long)]
    cap: Option<f64>,
    /// Hinge penalty C (QP form)
    #[arg(long)]
    penalty_c: Option<f64>,
    /// Bootstrap replicate count D (bootstrap form)
    #[arg(long)]
    replicates: Option<usize>,
    /// Score kind: raw | clipped | two_p_minus_one
    #[arg(long, value_parser = parse_score_kind)]
    score_kind: Option<ScoreKind>,
    /// Output directory (overrides [output].dir)
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl OverrideArgs {
    fn into_overrides(self) -> Overrides {
        Overrides {
            dataset: self.dataset,
            k: self.k,
            seed: self.seed,
            formulation: self.formulation,
            margin: self.margin,
            cap: self.cap,
            penalty_c: self.penalty_c,
            replicates: self.replicates,
            score_kind: self.score_kind,
            output_dir: self.output_dir,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the model grid under cross-validation and write out-of-sample
    /// scores plus per-model accuracy/variance tables
    Grid {
        /// Run configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Solve for combination weights from a score matrix
    Combine {
        /// Run configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Score matrix CSV (default: <output dir>/scores.csv)
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Evaluate the combined classifier against the best single model
    Evaluate {
        /// Run configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Score matrix CSV (default: <output dir>/scores.csv)
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Weights JSON (default: <output dir>/weights.json)
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Bias-variance laboratory for 0-1 loss at a single point
    Bvlab {
        #[command(subcommand)]
        cmd: BvlabCmd,
    },
}

#[derive(Subcommand)]
enum BvlabCmd {
    /// Decompose the expected loss of a label-independent Bernoulli(q)
    /// prediction at a point with P(t=+1) = p
    Point {
        /// True conditional P(t = +1)
        #[arg(long)]
        p: f64,
        /// Prediction rate P(y = +1)
        #[arg(long)]
        q: f64,
        /// Also run a Monte-Carlo estimate with this many trials
        #[arg(long)]
        trials: Option<u64>,
        /// Monte-Carlo seed
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the asymptotic 1NN error law 2·BE − 2·BE² over a Bayes-error
    /// grid (CSV)
    Curve {
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 0.5)]
        end: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze the prediction-equals-label channel at a point: dependent
    /// error, independent error, optimism, and optionally an empirical 1NN
    /// simulation
    Onenn {
        /// True conditional P(t = +1)
        #[arg(long)]
        p: f64,
        /// Run the empirical 1NN probe with this many trials
        #[arg(long)]
        empirical_trials: Option<u64>,
        /// Simulation seed
        #[arg(long, default_value_t = 13)]
        seed: u64,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path, overrides: OverrideArgs) -> CliResult<RunConfig> {
    RunConfig::load(config, &overrides.into_overrides()).map_err(CliError::config)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Grid { config, overrides } => {
            let config = load(&config, overrides)?;
            commands::cmd_grid(&config)
        }
        Cmd::Combine { config, scores, overrides } => {
            let config = load(&config, overrides)?;
            commands::cmd_combine(&config, scores.as_deref())
        }
        Cmd::Evaluate { config, scores, weights, overrides } => {
            let config = load(&config, overrides)?;
            commands::cmd_evaluate(&config, scores.as_deref(), weights.as_deref())
        }
        Cmd::Bvlab { cmd } => match cmd {
            BvlabCmd::Point { p, q, trials, seed, out } => {
                commands::cmd_bvlab_point(PointParams { p, q, trials, seed }, out.as_deref())
            }
            BvlabCmd::Curve { start, end, step, out } => {
                commands::cmd_bvlab_curve(CurveParams { start, end, step }, out.as_deref())
            }
            BvlabCmd::Onenn { p, empirical_trials, seed, out } => {
                commands::cmd_bvlab_onenn(OnennParams { p, empirical_trials, seed }, out.as_deref())
            }
        },
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {:#}", e.err);
        std::process::exit(e.kind.code());
    }
}
