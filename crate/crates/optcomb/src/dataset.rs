//! Dataset ingestion, ±1 label mapping, and out-of-sample evaluation plans
//! (stratified k-fold, leave-one-out as `k = N`, bootstrap with out-of-bag
//! sets). All plan generators are pure functions of their inputs and seed.

use crate::Matrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    MissingFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("file has no data rows")]
    Empty,
    #[error("row {row}: expected {expected} columns, got {got}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("row {row}: unknown label value {value:?} (mapping: {positive:?} -> +1, {negative:?} -> -1)")]
    UnknownLabel { row: usize, value: String, positive: String, negative: String },
    #[error("row {row}, column {col}: non-numeric feature value {value:?}")]
    NonNumericFeature { row: usize, col: usize, value: String },
    #[error("row {row}, column {col}: missing value")]
    MissingValue { row: usize, col: usize },
    #[error("label column index {index} out of range for {cols} columns")]
    LabelColumnOutOfRange { index: usize, cols: usize },
    #[error("dataset contains a single class; need both -1 and +1")]
    SingleClass,
    #[error("fold count k={k} out of range 2..=N (N={n})")]
    KOutOfRange { k: usize, n: usize },
    #[error("replicate count D={d} must be at least 1")]
    BadReplicateCount { d: usize },
    #[error("degenerate dataset: cannot form a nonempty out-of-bag set (N={n})")]
    DegenerateDataset { n: usize },
}

/// A feature table with ±1 targets.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub targets: Vec<i8>,
    pub feature_names: Vec<String>,
    pub id: String,
}

impl LabeledDataset {
    /// Validating constructor: shape agreement, targets in {-1, +1}, and both
    /// classes present.
    pub fn new(
        features: Matrix,
        targets: Vec<i8>,
        feature_names: Vec<String>,
        id: String,
    ) -> Result<Self, DatasetError> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(DatasetError::Empty);
        }
        assert_eq!(features.rows(), targets.len(), "row/target count mismatch");
        assert_eq!(features.cols(), feature_names.len(), "feature-name count mismatch");
        assert!(targets.iter().all(|&t| t == 1 || t == -1), "targets must be -1 or +1");
        let ds = LabeledDataset { features, targets, feature_names, id };
        let (pos, neg) = ds.class_counts();
        if pos == 0 || neg == 0 {
            return Err(DatasetError::SingleClass);
        }
        Ok(ds)
    }

    /// Number of instances.
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    /// Number of features.
    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// (positives, negatives).
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.targets.iter().filter(|&&t| t > 0).count();
        (pos, self.targets.len() - pos)
    }

    /// Row subset (e.g. the training portion of a fold). May be single-class;
    /// consumers that require both classes check on use.
    pub fn subset(&self, indices: &[usize], id: String) -> LabeledDataset {
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.features.row(i).to_vec()).collect();
        LabeledDataset {
            features: Matrix::from_rows(&rows),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            id,
        }
    }
}

/// Which column of the file holds the label.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    Last,
    Index(usize),
}

/// How to read a delimited text file into a [`LabeledDataset`]. The delimiter
/// (comma vs whitespace) is sniffed from the first line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub label_column: LabelColumn,
    /// Raw label value mapped to +1.
    pub positive_label: String,
    /// Raw label value mapped to -1.
    pub negative_label: String,
    /// Whether the first row is a header naming the columns.
    pub has_header: bool,
}

/// Load a delimited text file (CSV or whitespace-separated), mapping the label
/// column to ±1 per the schema. Rows with unparseable or missing cells are
/// rejected with their 1-based row number.
pub fn load_dataset(path: &Path, schema: &ColumnSchema) -> Result<LabeledDataset, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::MissingFile { path: path.display().to_string(), source })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let comma = text.lines().find(|l| !l.trim().is_empty()).is_some_and(|l| l.contains(','));
    let split = |line: &str| -> Vec<String> {
        if comma {
            line.split(',').map(|c| c.trim().to_string()).collect()
        } else {
            line.split_whitespace().map(str::to_string).collect()
        }
    };

    let mut header: Option<Vec<String>> = None;
    if schema.has_header {
        let (_, line) = lines.next().ok_or(DatasetError::Empty)?;
        header = Some(split(line));
    }

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<i8> = Vec::new();
    let mut ncols: Option<usize> = None;
    for (row, line) in lines {
        let cells = split(line);
        let expected = *ncols.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(DatasetError::RaggedRow { row, expected, got: cells.len() });
        }
        let label_idx = match schema.label_column {
            LabelColumn::Last => expected - 1,
            LabelColumn::Index(i) if i < expected => i,
            LabelColumn::Index(i) => {
                return Err(DatasetError::LabelColumnOutOfRange { index: i, cols: expected })
            }
        };
        let raw = &cells[label_idx];
        let target: i8 = if *raw == schema.positive_label {
            1
        } else if *raw == schema.negative_label {
            -1
        } else {
            return Err(DatasetError::UnknownLabel {
                row,
                value: raw.clone(),
                positive: schema.positive_label.clone(),
                negative: schema.negative_label.clone(),
            });
        };
        let mut feats = Vec::with_capacity(expected - 1);
        for (col, cell) in cells.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            if cell.is_empty() {
                return Err(DatasetError::MissingValue { row, col: col + 1 });
            }
            let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumericFeature {
                row,
                col: col + 1,
                value: cell.clone(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonNumericFeature {
                    row,
                    col: col + 1,
                    value: cell.clone(),
                });
            }
            feats.push(v);
        }
        features.push(feats);
        targets.push(target);
    }
    if features.is_empty() {
        return Err(DatasetError::Empty);
    }

    let nfeat = features[0].len();
    let feature_names = match header {
        Some(mut h) => {
            let label_idx = match schema.label_column {
                LabelColumn::Last => h.len() - 1,
                LabelColumn::Index(i) => i,
            };
            h.remove(label_idx);
            h
        }
        None => (1..=nfeat).map(|i| format!("f{i}")).collect(),
    };

    let id =
        path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    LabeledDataset::new(Matrix::from_rows(&features), targets, feature_names, id)
}

/// Assignment of every instance to one of `k` test folds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[i]` is the fold whose TEST set contains instance `i`.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

/// Stratified k-fold plan: per-class shuffles dealt round-robin with a single
/// running counter, so per-fold class counts are within 1 of perfect
/// stratification and every fold is nonempty. `k = N` is leave-one-out.
pub fn stratified_kfold(
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<FoldPlan, DatasetError> {
    let n = ds.n();
    if k < 2 || k > n {
        return Err(DatasetError::KOutOfRange { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counter = 0usize;
    let mut assignments = vec![0usize; n];
    for class in [1i8, -1i8] {
        let mut members: Vec<usize> = (0..n).filter(|&i| ds.targets[i] == class).collect();
        members.shuffle(&mut rng);
        for idx in members {
            assignments[idx] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Bootstrap resampling plan: `d` replicates of size N drawn with replacement,
/// each with its out-of-bag index set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub d: usize,
    pub replicates: Vec<Vec<usize>>,
    pub oob_sets: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Build a bootstrap plan. Replicates whose out-of-bag set would be empty are
/// redrawn (bounded retries); `N = 1` cannot produce a nonempty out-of-bag set
/// and is rejected as degenerate.
pub fn bootstrap_plan(
    ds: &LabeledDataset,
    d: usize,
    seed: u64,
) -> Result<BootstrapPlan, DatasetError> {
    if d < 1 {
        return Err(DatasetError::BadReplicateCount { d });
    }
    let n = ds.n();
    if n < 2 {
        return Err(DatasetError::DegenerateDataset { n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut replicates = Vec::with_capacity(d);
    let mut oob_sets = Vec::with_capacity(d);
    const MAX_RETRIES: usize = 1000;
    for _ in 0..d {
        let mut oob = Vec::new();
        let mut replicate = Vec::new();
        for attempt in 0.. {
            if attempt >= MAX_RETRIES {
                return Err(DatasetError::DegenerateDataset { n });
            }
            replicate = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            for &i in &replicate {
                in_bag[i] = true;
            }
            oob = (0..n).filter(|&i| !in_bag[i]).collect();
            if !oob.is_empty() {
                break;
            }
        }
        replicates.push(replicate);
        oob_sets.push(oob);
    }
    Ok(BootstrapPlan { d, replicates, oob_sets, seed })
}
