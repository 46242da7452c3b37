//! SVM hyperparameter grid and out-of-sample score production. Grid cells
//! (fold × model) are independent tasks run in parallel; results are
//! assembled positionally so the output is identical regardless of
//! scheduling or training order.

use crate::dataset::{BootstrapPlan, FoldPlan, LabeledDataset};
use crate::metrics;
use crate::svm::{train_svm, SvmError};
use crate::Matrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("model grid is empty")]
    EmptyGrid,
    #[error("plan covers {plan_n} instances but the dataset has {data_n}")]
    PlanMismatch { plan_n: usize, data_n: usize },
    #[error("training failed for fold {fold}, model {model}: {source}")]
    Train {
        fold: usize,
        model: usize,
        #[source]
        source: SvmError,
    },
    #[error("training failed for replicate {replicate}, model {model}: {source}")]
    TrainBootstrap {
        replicate: usize,
        model: usize,
        #[source]
        source: SvmError,
    },
}

/// A (cost, gamma) grid. Models are numbered 1..=K in gamma-major order:
/// model (g_idx, c_idx) has number g_idx·|costs| + c_idx + 1, so the first
/// |costs| numbers share the smallest gamma.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelGrid {
    pub cost_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
}

impl ModelGrid {
    /// The default experiment grid: C ∈ 2^{−2..=10} (13 values) and
    /// γ ∈ 2^{−17..=−6} (12 values), K = 156.
    pub fn default_svm_grid() -> Self {
        Self::from_exponents(&(-2..=10).collect::<Vec<_>>(), &(-17..=-6).collect::<Vec<_>>())
    }

    pub fn from_exponents(cost_exps: &[i32], gamma_exps: &[i32]) -> Self {
        ModelGrid {
            cost_values: cost_exps.iter().map(|&e| 2f64.powi(e)).collect(),
            gamma_values: gamma_exps.iter().map(|&e| 2f64.powi(e)).collect(),
        }
    }

    /// Total number of models K.
    pub fn k(&self) -> usize {
        self.cost_values.len() * self.gamma_values.len()
    }

    /// (cost, gamma) of a 1-based model number.
    pub fn params(&self, model_number: usize) -> (f64, f64) {
        assert!(
            (1..=self.k()).contains(&model_number),
            "model number {model_number} out of 1..={}",
            self.k()
        );
        let idx = model_number - 1;
        let nc = self.cost_values.len();
        (self.cost_values[idx % nc], self.gamma_values[idx / nc])
    }
}

/// What the score entries mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Raw SVM decision values (default).
    Raw,
    /// Raw values clamped to [−1, 1].
    Clipped,
    /// Per-model isotonic-calibrated posterior mapped to 2p − 1 ∈ [−1, 1].
    TwoPMinusOne,
}

/// Per-instance training provenance: which fold produced row i's scores and
/// the exact training index set of each fold, so out-of-sampleness can be
/// audited after the fact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldProvenance {
    pub fold_of_row: Vec<usize>,
    pub training_sets: Vec<Vec<usize>>,
}

/// N×K out-of-sample score matrix: entry (i, k) is model k's decision value
/// for instance i, produced by a model whose training data excluded i.
#[derive(Clone, Debug)]
pub struct OofScoreMatrix {
    pub scores: Matrix,
    pub kind: ScoreKind,
    pub provenance: Option<FoldProvenance>,
    /// Number of grid cells whose optimizer hit its sweep budget.
    pub nonconverged_cells: usize,
}

impl OofScoreMatrix {
    /// Audit the out-of-sample invariant: no instance appears in the training
    /// set of the fold that scored it. Panics on violation; no-op for
    /// matrices without provenance (e.g. externally injected scores).
    pub fn assert_out_of_sample(&self) {
        if let Some(p) = &self.provenance {
            for (i, &fold) in p.fold_of_row.iter().enumerate() {
                assert!(
                    !p.training_sets[fold].contains(&i),
                    "instance {i} leaked into the training set of fold {fold}"
                );
            }
        }
    }

    /// Per-model CV accuracy from the sign of the out-of-sample scores
    /// (score ≥ 0 predicts +1), in model-number order.
    pub fn per_model_accuracy(&self, targets: &[i8]) -> Vec<f64> {
        (0..self.scores.cols())
            .map(|k| {
                let hits = (0..self.scores.rows())
                    .filter(|&i| {
                        let pred: i8 = if self.scores.get(i, k) >= 0.0 { 1 } else { -1 };
                        pred == targets[i]
                    })
                    .count();
                hits as f64 / self.scores.rows() as f64
            })
            .collect()
    }

    /// Per-model variance of (score − numeric label), in model-number order.
    pub fn per_model_variance(&self, targets: &[i8]) -> Vec<f64> {
        let numeric: Vec<f64> = targets.iter().map(|&t| f64::from(t)).collect();
        (0..self.scores.cols())
            .map(|k| {
                let col = self.scores.col(k);
                metrics::score_variance(&numeric, &col).expect("N >= 2 for variance")
            })
            .collect()
    }

    /// Convert raw scores into the requested kind. Clipping clamps to
    /// [−1, 1]; the calibrated kind fits a per-column isotonic model of
    /// P(t=+1 | score) on the out-of-sample scores themselves and emits
    /// 2p − 1.
    pub fn into_kind(mut self, kind: ScoreKind, targets: &[i8]) -> Self {
        assert_eq!(self.kind, ScoreKind::Raw, "transforms start from raw scores");
        match kind {
            ScoreKind::Raw => {}
            ScoreKind::Clipped => {
                for i in 0..self.scores.rows() {
                    for k in 0..self.scores.cols() {
                        let v = self.scores.get(i, k).clamp(-1.0, 1.0);
                        self.scores.set(i, k, v);
                    }
                }
            }
            ScoreKind::TwoPMinusOne => {
                let binary = metrics::to_binary_targets(targets);
                for k in 0..self.scores.cols() {
                    let col = self.scores.col(k);
                    let iso = metrics::isotonic_fit(&col, &binary)
                        .expect("nonempty column with binary targets");
                    for i in 0..self.scores.rows() {
                        self.scores.set(i, k, 2.0 * iso.predict(col[i]) - 1.0);
                    }
                }
            }
        }
        self.kind = kind;
        self
    }
}

/// Out-of-bag score tensor: one N×K matrix per bootstrap replicate, with a
/// per-replicate validity mask (true where the instance was out-of-bag and
/// therefore scored).
#[derive(Clone, Debug)]
pub struct OobScoreTensor {
    pub replicates: Vec<Matrix>,
    pub masks: Vec<Vec<bool>>,
    pub kind: ScoreKind,
    pub nonconverged_cells: usize,
}

pub use crate::svm::TrainParams;

/// Train the full grid under a fold plan and collect out-of-sample scores:
/// entry (i, k) comes from model k trained on every fold except the one
/// holding i. Columns follow grid numbering.
pub fn grid_oof_scores(
    ds: &LabeledDataset,
    grid: &ModelGrid,
    plan: &FoldPlan,
    params: TrainParams,
) -> Result<OofScoreMatrix, GridError> {
    if grid.k() == 0 {
        return Err(GridError::EmptyGrid);
    }
    if plan.assignments.len() != ds.n() {
        return Err(GridError::PlanMismatch { plan_n: plan.assignments.len(), data_n: ds.n() });
    }

    let folds: Vec<(Vec<usize>, Vec<usize>)> =
        (0..plan.k).map(|f| (plan.train_indices(f), plan.test_indices(f))).collect();
    let subsets: Vec<LabeledDataset> = folds
        .iter()
        .enumerate()
        .map(|(f, (train, _))| ds.subset(train, format!("{}-fold{f}", ds.id)))
        .collect();

    let cells: Vec<(usize, usize)> =
        (0..plan.k).flat_map(|f| (1..=grid.k()).map(move |m| (f, m))).collect();
    let results: Result<Vec<_>, GridError> = cells
        .par_iter()
        .map(|&(fold, model)| {
            let (cost, gamma) = grid.params(model);
            let svm = train_svm(&subsets[fold], cost, gamma, &params)
                .map_err(|source| GridError::Train { fold, model, source })?;
            let scores: Vec<(usize, f64)> = folds[fold]
                .1
                .iter()
                .map(|&i| (i, svm.decision_score(ds.features.row(i))))
                .collect();
            Ok((fold, model, scores, svm.converged))
        })
        .collect();

    let mut matrix = Matrix::zeros(ds.n(), grid.k());
    let mut nonconverged = 0usize;
    for (_, model, scores, converged) in results? {
        if !converged {
            nonconverged += 1;
        }
        for (i, s) in scores {
            matrix.set(i, model - 1, s);
        }
    }

    let out = OofScoreMatrix {
        scores: matrix,
        kind: ScoreKind::Raw,
        provenance: Some(FoldProvenance {
            fold_of_row: plan.assignments.clone(),
            training_sets: folds.into_iter().map(|(train, _)| train).collect(),
        }),
        nonconverged_cells: nonconverged,
    };
    out.assert_out_of_sample();
    Ok(out)
}

/// Train the full grid under a bootstrap plan: for each replicate d, models
/// train on the resampled rows and score only the out-of-bag instances.
pub fn grid_oob_scores(
    ds: &LabeledDataset,
    grid: &ModelGrid,
    plan: &BootstrapPlan,
    params: TrainParams,
) -> Result<OobScoreTensor, GridError> {
    if grid.k() == 0 {
        return Err(GridError::EmptyGrid);
    }
    if plan.replicates.iter().any(|r| r.len() != ds.n()) {
        return Err(GridError::PlanMismatch {
            plan_n: plan.replicates.first().map_or(0, Vec::len),
            data_n: ds.n(),
        });
    }

    let subsets: Vec<LabeledDataset> = plan
        .replicates
        .iter()
        .enumerate()
        .map(|(d, rep)| ds.subset(rep, format!("{}-rep{d}", ds.id)))
        .collect();

    let cells: Vec<(usize, usize)> =
        (0..plan.d).flat_map(|d| (1..=grid.k()).map(move |m| (d, m))).collect();
    let results: Result<Vec<_>, GridError> = cells
        .par_iter()
        .map(|&(replicate, model)| {
            let (cost, gamma) = grid.params(model);
            let svm = train_svm(&subsets[replicate], cost, gamma, &params)
                .map_err(|source| GridError::TrainBootstrap { replicate, model, source })?;
            let scores: Vec<(usize, f64)> = plan.oob_sets[replicate]
                .iter()
                .map(|&i| (i, svm.decision_score(ds.features.row(i))))
                .collect();
            Ok((replicate, model, scores, svm.converged))
        })
        .collect();

    let mut replicates = vec![Matrix::zeros(ds.n(), grid.k()); plan.d];
    let mut masks: Vec<Vec<bool>> = (0..plan.d)
        .map(|d| {
            let mut mask = vec![false; ds.n()];
            for &i in &plan.oob_sets[d] {
                mask[i] = true;
            }
            mask
        })
        .collect();
    let mut nonconverged = 0usize;
    for (d, model, scores, converged) in results? {
        if !converged {
            nonconverged += 1;
        }
        for (i, s) in scores {
            debug_assert!(masks[d][i]);
            replicates[d].set(i, model - 1, s);
        }
    }
    masks.truncate(plan.d);

    Ok(OobScoreTensor { replicates, masks, kind: ScoreKind::Raw, nonconverged_cells: nonconverged })
}
