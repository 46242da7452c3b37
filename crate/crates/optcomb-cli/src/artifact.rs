//! Pipeline stage artifacts: plain CSV/JSON files, each embedding the stage
//! name and the config hash that produced it. Floating-point values are
//! written with Rust's shortest-roundtrip formatting, so identical runs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use optcomb::combine::Formulation;
use optcomb::grid::{OobScoreTensor, ScoreKind};
use optcomb::metrics::{IsotonicModel, RocCurve};
use optcomb::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::score_kind_name;

/// The out-of-sample score matrix with its provenance comments.
#[derive(Clone, Debug)]
pub struct ScoresArtifact {
    pub config_hash: String,
    pub dataset_id: String,
    pub kind: ScoreKind,
    pub nonconverged_cells: usize,
    pub ids: Vec<usize>,
    pub targets: Vec<i8>,
    pub scores: Matrix,
}

/// Per-model grid statistics (the data behind the accuracy/variance plots).
#[derive(Clone, Copy, Debug)]
pub struct ModelStatsRow {
    pub model: usize,
    pub cost: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
    pub score_variance: f64,
}

/// Out-of-bag scores in long form: one row per (replicate, instance) pair
/// where the instance was out of the bag.
#[derive(Clone, Debug)]
pub struct OobArtifact {
    pub config_hash: String,
    pub dataset_id: String,
    pub kind: ScoreKind,
    pub replicates: usize,
    pub instances: usize,
    pub nonconverged_cells: usize,
    /// (replicate, instance id, target, score row).
    pub rows: Vec<(usize, usize, i8, Vec<f64>)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelWeightRow {
    pub model: usize,
    pub cost: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
    pub weight: f64,
}

/// Combination weights plus everything needed to audit the solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightsArtifact {
    pub stage: String,
    pub config_hash: String,
    pub dataset: String,
    pub score_kind: String,
    pub formulation: Formulation,
    pub margin: f64,
    pub cap: Option<f64>,
    pub penalty_c: Option<f64>,
    pub objective_value: f64,
    pub nonzero_count: usize,
    pub max_accuracy_model: usize,
    pub max_accuracy_cv: f64,
    pub max_accuracy_weight: f64,
    pub max_accuracy_model_zero_weight: bool,
    pub models: Vec<ModelWeightRow>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub accuracy: f64,
    pub auc: f64,
    pub calibration_mae: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BestSingleMetrics {
    pub model: usize,
    pub cost: f64,
    pub gamma: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub calibration_mae: f64,
}

/// Head-to-head evaluation of the combined classifier vs the best single
/// model, on the same out-of-sample scores.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub stage: String,
    pub config_hash: String,
    pub dataset: String,
    pub instances: usize,
    pub models: usize,
    pub combined: ClassifierMetrics,
    pub best_single: BestSingleMetrics,
    /// combined.auc − best_single.auc.
    pub auc_gap: f64,
    /// combined.calibration_mae − best_single.calibration_mae.
    pub calibration_mae_gap: f64,
}

fn parse_kind(s: &str) -> Result<ScoreKind> {
    crate::config::parse_score_kind(s).map_err(|e| anyhow::anyhow!(e))
}

fn open_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating output directory {}", parent.display()))?;
        }
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Split a CSV file into its `# key: value` comment map and data lines.
fn read_csv_lines(path: &Path) -> Result<(BTreeMap<String, String>, Vec<String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut comments = BTreeMap::new();
    let mut data = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once(':') {
                comments.insert(key.trim().to_string(), value.trim().to_string());
            }
        } else if !line.trim().is_empty() {
            data.push(line.to_string());
        }
    }
    Ok((comments, data))
}

fn comment<'a>(map: &'a BTreeMap<String, String>, key: &str, path: &Path) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .with_context(|| format!("{} is missing the `# {key}:` header", path.display()))
}

fn expect_stage(map: &BTreeMap<String, String>, want: &str, path: &Path) -> Result<()> {
    let got = comment(map, "stage", path)?;
    if got != want {
        bail!("{} is a {got:?} artifact, expected {want:?}", path.display());
    }
    Ok(())
}

pub fn write_scores(path: &Path, art: &ScoresArtifact) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "# stage: grid-scores")?;
    writeln!(w, "# config: {}", art.config_hash)?;
    writeln!(w, "# dataset: {}", art.dataset_id)?;
    writeln!(w, "# kind: {}", score_kind_name(art.kind))?;
    writeln!(w, "# nonconverged_cells: {}", art.nonconverged_cells)?;
    write!(w, "id,target")?;
    for model in 1..=art.scores.cols() {
        write!(w, ",{model}")?;
    }
    writeln!(w)?;
    for (row, (&id, &target)) in art.ids.iter().zip(&art.targets).enumerate() {
        write!(w, "{id},{target}")?;
        for &s in art.scores.row(row) {
            write!(w, ",{s}")?;
        }
        writeln!(w)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn read_scores(path: &Path) -> Result<ScoresArtifact> {
    let (comments, data) = read_csv_lines(path)?;
    expect_stage(&comments, "grid-scores", path)?;
    let kind = parse_kind(comment(&comments, "kind", path)?)?;
    let nonconverged_cells = comment(&comments, "nonconverged_cells", path)?
        .parse()
        .context("parsing nonconverged_cells")?;
    let Some((header, rows)) = data.split_first() else {
        bail!("{} has no header row", path.display());
    };
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "id" || columns[1] != "target" {
        bail!("{} header must start with id,target,1,...", path.display());
    }
    let k = columns.len() - 2;
    for (j, name) in columns[2..].iter().enumerate() {
        if name.parse::<usize>() != Ok(j + 1) {
            bail!("{} score columns must be numbered 1..={k}", path.display());
        }
    }
    let mut ids = Vec::with_capacity(rows.len());
    let mut targets = Vec::with_capacity(rows.len());
    let mut scores = Matrix::zeros(rows.len(), k);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != k + 2 {
            bail!("{} row {i}: expected {} cells, got {}", path.display(), k + 2, cells.len());
        }
        ids.push(cells[0].parse().with_context(|| format!("row {i}: bad id"))?);
        targets.push(cells[1].parse().with_context(|| format!("row {i}: bad target"))?);
        for (j, cell) in cells[2..].iter().enumerate() {
            let v: f64 = cell.parse().with_context(|| format!("row {i}: bad score"))?;
            scores.set(i, j, v);
        }
    }
    Ok(ScoresArtifact {
        config_hash: comment(&comments, "config", path)?.to_string(),
        dataset_id: comment(&comments, "dataset", path)?.to_string(),
        kind,
        nonconverged_cells,
        ids,
        targets,
        scores,
    })
}

pub fn write_models(
    path: &Path,
    config_hash: &str,
    dataset_id: &str,
    rows: &[ModelStatsRow],
) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "# stage: grid-models")?;
    writeln!(w, "# config: {config_hash}")?;
    writeln!(w, "# dataset: {dataset_id}")?;
    writeln!(w, "model,cost,gamma,cv_accuracy,score_variance")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.model, r.cost, r.gamma, r.cv_accuracy, r.score_variance)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_oob(path: &Path, art: &OobArtifact) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "# stage: grid-oob-scores")?;
    writeln!(w, "# config: {}", art.config_hash)?;
    writeln!(w, "# dataset: {}", art.dataset_id)?;
    writeln!(w, "# kind: {}", score_kind_name(art.kind))?;
    writeln!(w, "# replicates: {}", art.replicates)?;
    writeln!(w, "# instances: {}", art.instances)?;
    writeln!(w, "# nonconverged_cells: {}", art.nonconverged_cells)?;
    let k = art.rows.first().map_or(0, |r| r.3.len());
    write!(w, "replicate,id,target")?;
    for model in 1..=k {
        write!(w, ",{model}")?;
    }
    writeln!(w)?;
    for (rep, id, target, row) in &art.rows {
        write!(w, "{rep},{id},{target}")?;
        for s in row {
            write!(w, ",{s}")?;
        }
        writeln!(w)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn read_oob(path: &Path) -> Result<OobArtifact> {
    let (comments, data) = read_csv_lines(path)?;
    expect_stage(&comments, "grid-oob-scores", path)?;
    let kind = parse_kind(comment(&comments, "kind", path)?)?;
    let replicates: usize =
        comment(&comments, "replicates", path)?.parse().context("parsing replicates")?;
    let instances: usize =
        comment(&comments, "instances", path)?.parse().context("parsing instances")?;
    let nonconverged_cells = comment(&comments, "nonconverged_cells", path)?
        .parse()
        .context("parsing nonconverged_cells")?;
    let Some((header, rows)) = data.split_first() else {
        bail!("{} has no header row", path.display());
    };
    let k = header.split(',').count().saturating_sub(3);
    if k == 0 {
        bail!("{} header must be replicate,id,target,1,...", path.display());
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != k + 3 {
            bail!("{} row {i}: expected {} cells, got {}", path.display(), k + 3, cells.len());
        }
        let rep: usize = cells[0].parse().with_context(|| format!("row {i}: bad replicate"))?;
        let id: usize = cells[1].parse().with_context(|| format!("row {i}: bad id"))?;
        let target: i8 = cells[2].parse().with_context(|| format!("row {i}: bad target"))?;
        if rep >= replicates || id >= instances {
            bail!("{} row {i}: replicate {rep} / id {id} out of declared range", path.display());
        }
        let mut scores = Vec::with_capacity(k);
        for cell in &cells[3..] {
            scores.push(cell.parse::<f64>().with_context(|| format!("row {i}: bad score"))?);
        }
        out.push((rep, id, target, scores));
    }
    Ok(OobArtifact {
        config_hash: comment(&comments, "config", path)?.to_string(),
        dataset_id: comment(&comments, "dataset", path)?.to_string(),
        kind,
        replicates,
        instances,
        nonconverged_cells,
        rows: out,
    })
}

impl OobArtifact {
    /// Reassemble the dense replicate tensor and per-instance targets.
    /// Instances that never appear get mask=false everywhere and a zero
    /// target; the combiner rejects them as never-out-of-bag downstream.
    pub fn to_tensor(&self) -> Result<(OobScoreTensor, Vec<i8>)> {
        let k = self.rows.first().map(|r| r.3.len()).unwrap_or(0);
        let mut replicates = vec![Matrix::zeros(self.instances, k); self.replicates];
        let mut masks = vec![vec![false; self.instances]; self.replicates];
        let mut targets = vec![0i8; self.instances];
        for (rep, id, target, row) in &self.rows {
            if masks[*rep][*id] {
                bail!("duplicate entry for replicate {rep}, instance {id}");
            }
            masks[*rep][*id] = true;
            if targets[*id] != 0 && targets[*id] != *target {
                bail!("conflicting targets recorded for instance {id}");
            }
            targets[*id] = *target;
            for (j, &s) in row.iter().enumerate() {
                replicates[*rep].set(*id, j, s);
            }
        }
        let tensor = OobScoreTensor {
            replicates,
            masks,
            kind: self.kind,
            nonconverged_cells: self.nonconverged_cells,
        };
        Ok((tensor, targets))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = open_writer(path)?;
    let text = serde_json::to_string_pretty(value).context("serializing JSON artifact")?;
    writeln!(w, "{text}")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn read_weights(path: &Path) -> Result<WeightsArtifact> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let art: WeightsArtifact =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if art.stage != "combine-weights" {
        bail!("{} is a {:?} artifact, expected \"combine-weights\"", path.display(), art.stage);
    }
    Ok(art)
}

pub fn write_roc(path: &Path, config_hash: &str, classifier: &str, roc: &RocCurve) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "# stage: evaluate-roc")?;
    writeln!(w, "# config: {config_hash}")?;
    writeln!(w, "# classifier: {classifier}")?;
    writeln!(w, "# auc: {}", roc.auc)?;
    writeln!(w, "fpr,tpr")?;
    for (fpr, tpr) in &roc.points {
        writeln!(w, "{fpr},{tpr}")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_reliability(
    path: &Path,
    config_hash: &str,
    classifier: &str,
    model: &IsotonicModel,
) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "# stage: evaluate-reliability")?;
    writeln!(w, "# config: {config_hash}")?;
    writeln!(w, "# classifier: {classifier}")?;
    writeln!(w, "score,calibrated_p")?;
    for (b, f) in model.breakpoints.iter().zip(&model.fitted) {
        writeln!(w, "{b},{f}")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_roundtrip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let art = ScoresArtifact {
            config_hash: "abc123".into(),
            dataset_id: "toy".into(),
            kind: ScoreKind::Raw,
            nonconverged_cells: 1,
            ids: vec![0, 1, 2],
            targets: vec![1, -1, 1],
            scores: Matrix::from_rows(&[
                vec![0.5, -1.25e-7],
                vec![-2.0, 3.0000000001],
                vec![1.0 / 3.0, -0.0],
            ]),
        };
        write_scores(&path, &art).unwrap();
        let back = read_scores(&path).unwrap();
        assert_eq!(back.config_hash, art.config_hash);
        assert_eq!(back.kind, ScoreKind::Raw);
        assert_eq!(back.nonconverged_cells, 1);
        assert_eq!(back.ids, art.ids);
        assert_eq!(back.targets, art.targets);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(back.scores.get(i, j).to_bits(), art.scores.get(i, j).to_bits());
            }
        }
        // Writing the parsed artifact again reproduces the file byte for byte.
        let path2 = dir.path().join("scores2.csv");
        write_scores(&path2, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn scores_reader_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "# stage: grid-scores\n# config: x\n# dataset: toy\n# kind: raw\n# nonconverged_cells: 0\nid,target,1\n0,1,0.5,9.9\n").unwrap();
        assert!(read_scores(&path).unwrap_err().to_string().contains("expected 3 cells"));
        fs::write(&path, "# stage: grid-models\nmodel\n").unwrap();
        assert!(read_scores(&path).unwrap_err().to_string().contains("expected"));
    }

    #[test]
    fn oob_roundtrip_and_tensor_assembly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oob.csv");
        let art = OobArtifact {
            config_hash: "h".into(),
            dataset_id: "toy".into(),
            kind: ScoreKind::Raw,
            replicates: 2,
            instances: 3,
            nonconverged_cells: 0,
            rows: vec![
                (0, 1, -1, vec![0.25, -0.5]),
                (1, 0, 1, vec![1.5, 2.5]),
                (1, 2, 1, vec![-3.0, 0.125]),
            ],
        };
        write_oob(&path, &art).unwrap();
        let back = read_oob(&path).unwrap();
        assert_eq!(back.rows, art.rows);
        let (tensor, targets) = back.to_tensor().unwrap();
        assert_eq!(targets, vec![1, -1, 1]);
        assert!(tensor.masks[0][1] && tensor.masks[1][0] && tensor.masks[1][2]);
        assert!(!tensor.masks[0][0] && !tensor.masks[0][2] && !tensor.masks[1][1]);
        assert_eq!(tensor.replicates[0].get(1, 1), -0.5);
        assert_eq!(tensor.replicates[1].get(2, 0), -3.0);
    }

    #[test]
    fn weights_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        let art = WeightsArtifact {
            stage: "combine-weights".into(),
            config_hash: "h".into(),
            dataset: "toy".into(),
            score_kind: "raw".into(),
            formulation: Formulation::SingleLp,
            margin: 0.5,
            cap: None,
            penalty_c: None,
            objective_value: 1.5,
            nonzero_count: 1,
            max_accuracy_model: 2,
            max_accuracy_cv: 0.75,
            max_accuracy_weight: 0.0,
            max_accuracy_model_zero_weight: true,
            models: vec![ModelWeightRow {
                model: 1,
                cost: 0.25,
                gamma: 2.0,
                cv_accuracy: 0.5,
                weight: 1.0,
            }],
        };
        write_json(&path, &art).unwrap();
        let back = read_weights(&path).unwrap();
        assert_eq!(back.models[0].weight, 1.0);
        assert_eq!(back.formulation, Formulation::SingleLp);
        // A metrics file is not a weights file.
        let other = dir.path().join("metrics.json");
        fs::write(&other, "{\"stage\": \"evaluate-metrics\"}").unwrap();
        assert!(read_weights(&other).is_err());
    }
}
