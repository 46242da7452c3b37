//! One declarative TOML file describes an entire pipeline run: dataset and
//! schema, fold plan, model grid, combiner formulation, score kind, output
//! directory. A SHA-256 hash of everything except the output location is
//! embedded in every artifact, so files declare exactly which experiment
//! produced them and identical configs yield byte-identical outputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use optcomb::combine::{Formulation, LpOptions, QpOptions};
use optcomb::dataset::{ColumnSchema, LabelColumn};
use optcomb::grid::{ModelGrid, ScoreKind, TrainParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Inclusive exponent range for a power-of-two hyperparameter sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentRange {
    pub start: i32,
    pub end: i32,
    #[serde(default = "one")]
    pub step: u32,
}

fn one() -> u32 {
    1
}

impl ExponentRange {
    pub fn expand(&self) -> Vec<i32> {
        (self.start..=self.end).step_by(self.step.max(1) as usize).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: LabelColumn,
    pub positive_label: String,
    pub negative_label: String,
    #[serde(default)]
    pub has_header: bool,
}

fn default_label_column() -> LabelColumn {
    LabelColumn::Last
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldSection {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldSection {
    fn default() -> Self {
        FoldSection { k: 5, seed: 42 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub cost_exponents: ExponentRange,
    pub gamma_exponents: ExponentRange,
    pub tol: f64,
    pub max_passes: usize,
    pub scale_features: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        let defaults = TrainParams::default();
        GridSection {
            cost_exponents: ExponentRange { start: -2, end: 10, step: 1 },
            gamma_exponents: ExponentRange { start: -17, end: -6, step: 1 },
            tol: defaults.tol,
            max_passes: defaults.max_passes,
            scale_features: defaults.scale_features,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombineSection {
    pub formulation: Formulation,
    /// Required margin; when absent the formulation default applies
    /// (0.5 for the LP forms, 1.0 for the QP).
    pub margin: Option<f64>,
    /// Optional per-weight cap (LP forms only).
    pub cap: Option<f64>,
    /// Hinge penalty (QP only).
    pub penalty_c: f64,
    /// Number of bootstrap replicates D (bootstrap form only).
    pub replicates: usize,
    pub bootstrap_seed: u64,
    pub qp_iterations: usize,
}

impl Default for CombineSection {
    fn default() -> Self {
        CombineSection {
            formulation: Formulation::SingleLp,
            margin: None,
            cap: None,
            penalty_c: 1.0,
            replicates: 50,
            bootstrap_seed: 7,
            qp_iterations: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoresSection {
    pub kind: ScoreKind,
}

impl Default for ScoresSection {
    fn default() -> Self {
        ScoresSection { kind: ScoreKind::Raw }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub folds: FoldSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub combine: CombineSection,
    #[serde(default)]
    pub scores: ScoresSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Command-line overrides applied on top of the config file before hashing.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub formulation: Option<Formulation>,
    pub margin: Option<f64>,
    pub cap: Option<f64>,
    pub penalty_c: Option<f64>,
    pub replicates: Option<usize>,
    pub score_kind: Option<ScoreKind>,
    pub output_dir: Option<PathBuf>,
}

/// The hashed view: every experiment-defining section, excluding the output
/// location so that re-running the same experiment into a different directory
/// keeps the same identity.
#[derive(Serialize)]
struct HashedView<'a> {
    dataset: &'a DatasetSection,
    folds: &'a FoldSection,
    grid: &'a GridSection,
    combine: &'a CombineSection,
    scores: &'a ScoresSection,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, ov: &Overrides) {
        if let Some(p) = &ov.dataset {
            self.dataset.path = p.clone();
        }
        if let Some(k) = ov.k {
            self.folds.k = k;
        }
        if let Some(s) = ov.seed {
            self.folds.seed = s;
        }
        if let Some(f) = ov.formulation {
            self.combine.formulation = f;
        }
        if let Some(m) = ov.margin {
            self.combine.margin = Some(m);
        }
        if let Some(c) = ov.cap {
            self.combine.cap = Some(c);
        }
        if let Some(c) = ov.penalty_c {
            self.combine.penalty_c = c;
        }
        if let Some(d) = ov.replicates {
            self.combine.replicates = d;
        }
        if let Some(k) = ov.score_kind {
            self.scores.kind = k;
        }
        if let Some(d) = &ov.output_dir {
            self.output.dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dataset.path.exists() {
            bail!("dataset path {} does not exist", self.dataset.path.display());
        }
        if self.dataset.positive_label == self.dataset.negative_label {
            bail!("positive and negative labels must differ");
        }
        if self.folds.k < 2 {
            bail!("fold count k must be at least 2, got {}", self.folds.k);
        }
        for (name, range) in
            [("cost", &self.grid.cost_exponents), ("gamma", &self.grid.gamma_exponents)]
        {
            if range.step == 0 {
                bail!("{name} exponent step must be at least 1");
            }
            if range.expand().is_empty() {
                bail!("{name} exponent range {}..={} is empty", range.start, range.end);
            }
        }
        if !(self.grid.tol > 0.0) {
            bail!("optimizer tolerance must be positive, got {}", self.grid.tol);
        }
        if self.grid.max_passes == 0 {
            bail!("max_passes must be at least 1");
        }
        if let Some(m) = self.combine.margin {
            if !(m > 0.0) {
                bail!("margin must be positive, got {m}");
            }
        }
        if let Some(c) = self.combine.cap {
            if !(c > 0.0 && c <= 1.0) {
                bail!("cap must lie in (0, 1], got {c}");
            }
        }
        if !(self.combine.penalty_c > 0.0) {
            bail!("penalty_c must be positive, got {}", self.combine.penalty_c);
        }
        if self.combine.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if self.combine.qp_iterations == 0 {
            bail!("qp_iterations must be at least 1");
        }
        if self.combine.formulation == Formulation::BootstrapLp
            && self.scores.kind == ScoreKind::TwoPMinusOne
        {
            bail!(
                "two_p_minus_one scores are not defined for the bootstrap form: \
                 calibration needs a single out-of-sample score per instance"
            );
        }
        Ok(())
    }

    /// SHA-256 over the canonical TOML serialization of the experiment
    /// definition (everything except the output directory).
    pub fn config_hash(&self) -> String {
        let view = HashedView {
            dataset: &self.dataset,
            folds: &self.folds,
            grid: &self.grid,
            combine: &self.combine,
            scores: &self.scores,
        };
        let canonical = toml::to_string(&view).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use fmt::Write;
            write!(hex, "{byte:02x}").expect("hex digits");
        }
        hex
    }

    pub fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            label_column: self.dataset.label_column,
            positive_label: self.dataset.positive_label.clone(),
            negative_label: self.dataset.negative_label.clone(),
            has_header: self.dataset.has_header,
        }
    }

    pub fn model_grid(&self) -> ModelGrid {
        ModelGrid::from_exponents(
            &self.grid.cost_exponents.expand(),
            &self.grid.gamma_exponents.expand(),
        )
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            tol: self.grid.tol,
            max_passes: self.grid.max_passes,
            scale_features: self.grid.scale_features,
        }
    }

    /// Margin with the per-formulation default applied.
    pub fn margin(&self) -> f64 {
        self.combine.margin.unwrap_or(match self.combine.formulation {
            Formulation::SingleLp | Formulation::BootstrapLp => 0.5,
            Formulation::Qp => 1.0,
        })
    }

    pub fn lp_options(&self) -> LpOptions {
        LpOptions { margin: self.margin(), cap: self.combine.cap, sum_to_one: true }
    }

    pub fn qp_options(&self) -> QpOptions {
        QpOptions {
            penalty_c: self.combine.penalty_c,
            margin: self.margin(),
            iterations: self.combine.qp_iterations,
        }
    }
}

pub fn parse_formulation(s: &str) -> Result<Formulation, String> {
    match s {
        "single_lp" => Ok(Formulation::SingleLp),
        "bootstrap_lp" => Ok(Formulation::BootstrapLp),
        "qp" => Ok(Formulation::Qp),
        other => Err(format!("unknown formulation {other:?} (single_lp, bootstrap_lp, qp)")),
    }
}

pub fn parse_score_kind(s: &str) -> Result<ScoreKind, String> {
    match s {
        "raw" => Ok(ScoreKind::Raw),
        "clipped" => Ok(ScoreKind::Clipped),
        "two_p_minus_one" => Ok(ScoreKind::TwoPMinusOne),
        other => Err(format!("unknown score kind {other:?} (raw, clipped, two_p_minus_one)")),
    }
}

pub fn score_kind_name(kind: ScoreKind) -> &'static str {
    match kind {
        ScoreKind::Raw => "raw",
        ScoreKind::Clipped => "clipped",
        ScoreKind::TwoPMinusOne => "two_p_minus_one",
    }
}

pub fn formulation_name(f: Formulation) -> &'static str {
    match f {
        Formulation::SingleLp => "single_lp",
        Formulation::BootstrapLp => "bootstrap_lp",
        Formulation::Qp => "qp",
    }
}
