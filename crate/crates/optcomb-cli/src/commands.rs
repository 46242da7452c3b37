//! The four pipeline verbs: `grid` trains the model grid and writes
//! out-of-sample scores, `combine` solves for combination weights, `evaluate`
//! scores the combined classifier against the best single model, and `bvlab`
//! exposes the bias-variance laboratory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use optcomb::biasvar::{
    analytic_decomposition, dependent_decomposition, empirical_1nn_check,
    monte_carlo_decomposition, one_nn_curve, BvReport, OneNnCheck, PointWorld,
};
use optcomb::combine::{
    build_lp_bootstrap, build_lp_single, solve_weights_lp, solve_weights_qp, CombinerWeights,
    Formulation, NONZERO_THRESHOLD,
};
use optcomb::dataset::{bootstrap_plan, load_dataset, stratified_kfold};
use optcomb::grid::{grid_oob_scores, grid_oof_scores, OofScoreMatrix, ScoreKind};
use optcomb::metrics::{accuracy, calibration_mae, isotonic_fit, roc_auc, to_binary_targets};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::artifact::{
    self, BestSingleMetrics, ClassifierMetrics, MetricsArtifact, ModelStatsRow, ModelWeightRow,
    OobArtifact, ScoresArtifact, WeightsArtifact,
};
use crate::config::{formulation_name, score_kind_name, RunConfig};
use crate::error::{classify_combine, classify_dataset, classify_grid, CliError, CliResult};

pub fn scores_path(config: &RunConfig) -> PathBuf {
    config.output.dir.join("scores.csv")
}

pub fn models_path(config: &RunConfig) -> PathBuf {
    config.output.dir.join("models.csv")
}

pub fn oob_path(config: &RunConfig) -> PathBuf {
    config.output.dir.join("oob_scores.csv")
}

pub fn weights_path(config: &RunConfig) -> PathBuf {
    config.output.dir.join("weights.json")
}

pub fn metrics_path(config: &RunConfig) -> PathBuf {
    config.output.dir.join("metrics.json")
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

fn warn_on_hash_mismatch(file: &Path, artifact_hash: &str, current: &str) {
    if artifact_hash != current {
        eprintln!(
            "warning: {} was produced by config {}, current config is {} — proceeding",
            file.display(),
            short(artifact_hash),
            short(current)
        );
    }
}

/// Highest-CV-accuracy model; ties break toward the lowest model number.
fn best_model_index(cv_accuracy: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in cv_accuracy.iter().enumerate() {
        if a > cv_accuracy[best] {
            best = i;
        }
    }
    best
}

pub fn cmd_grid(config: &RunConfig) -> CliResult<()> {
    let start = Instant::now();
    let hash = config.config_hash();
    let ds = load_dataset(&config.dataset.path, &config.schema()).map_err(classify_dataset)?;
    let (pos, neg) = ds.class_counts();
    eprintln!(
        "grid: dataset {} — {} instances ({pos} positive, {neg} negative), {} features",
        ds.id,
        ds.n(),
        ds.num_features()
    );
    let plan =
        stratified_kfold(&ds, config.folds.k, config.folds.seed).map_err(classify_dataset)?;
    let grid = config.model_grid();
    eprintln!(
        "grid: {} models ({} costs × {} gammas), {}-fold CV, seed {}",
        grid.k(),
        grid.cost_values.len(),
        grid.gamma_values.len(),
        config.folds.k,
        config.folds.seed
    );

    let oof = grid_oof_scores(&ds, &grid, &plan, config.train_params()).map_err(classify_grid)?;
    let nonconverged = oof.nonconverged_cells;
    let oof = oof.into_kind(config.scores.kind, &ds.targets);
    let cv_accuracy = oof.per_model_accuracy(&ds.targets);
    let variance = oof.per_model_variance(&ds.targets);

    let art = ScoresArtifact {
        config_hash: hash.clone(),
        dataset_id: ds.id.clone(),
        kind: config.scores.kind,
        nonconverged_cells: nonconverged,
        ids: (0..ds.n()).collect(),
        targets: ds.targets.clone(),
        scores: oof.scores,
    };
    let scores_file = scores_path(config);
    artifact::write_scores(&scores_file, &art).map_err(CliError::data)?;

    let rows: Vec<ModelStatsRow> = (1..=grid.k())
        .map(|m| {
            let (cost, gamma) = grid.params(m);
            ModelStatsRow {
                model: m,
                cost,
                gamma,
                cv_accuracy: cv_accuracy[m - 1],
                score_variance: variance[m - 1],
            }
        })
        .collect();
    let models_file = models_path(config);
    artifact::write_models(&models_file, &hash, &ds.id, &rows).map_err(CliError::data)?;

    let best = best_model_index(&cv_accuracy);
    let (bc, bg) = grid.params(best + 1);
    eprintln!(
        "grid: best single model {} (C={bc}, g={bg}) with CV accuracy {:.4}; \
         {nonconverged} cells hit the sweep budget",
        best + 1,
        cv_accuracy[best]
    );
    eprintln!("grid: wrote {} and {}", scores_file.display(), models_file.display());

    if config.combine.formulation == Formulation::BootstrapLp {
        let bplan = bootstrap_plan(&ds, config.combine.replicates, config.combine.bootstrap_seed)
            .map_err(classify_dataset)?;
        let tensor =
            grid_oob_scores(&ds, &grid, &bplan, config.train_params()).map_err(classify_grid)?;
        let clip = config.scores.kind == ScoreKind::Clipped;
        let mut rows = Vec::new();
        for (d, mask) in tensor.masks.iter().enumerate() {
            for (i, &oob) in mask.iter().enumerate() {
                if oob {
                    let mut row = tensor.replicates[d].row(i).to_vec();
                    if clip {
                        for v in &mut row {
                            *v = v.clamp(-1.0, 1.0);
                        }
                    }
                    rows.push((d, i, ds.targets[i], row));
                }
            }
        }
        let oob_art = OobArtifact {
            config_hash: hash.clone(),
            dataset_id: ds.id.clone(),
            kind: config.scores.kind,
            replicates: config.combine.replicates,
            instances: ds.n(),
            nonconverged_cells: tensor.nonconverged_cells,
            rows,
        };
        let oob_file = oob_path(config);
        artifact::write_oob(&oob_file, &oob_art).map_err(CliError::data)?;
        eprintln!(
            "grid: wrote {} ({} replicates, {} out-of-bag rows)",
            oob_file.display(),
            config.combine.replicates,
            oob_art.rows.len()
        );
    }

    eprintln!("grid: done in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_combine(config: &RunConfig, scores_override: Option<&Path>) -> CliResult<()> {
    let start = Instant::now();
    let hash = config.config_hash();
    let scores_file = scores_override.map_or_else(|| scores_path(config), Path::to_path_buf);
    let art = artifact::read_scores(&scores_file).map_err(CliError::data)?;
    warn_on_hash_mismatch(&scores_file, &art.config_hash, &hash);

    let grid = config.model_grid();
    if grid.k() != art.scores.cols() {
        return Err(CliError::data(anyhow!(
            "score matrix has {} model columns but the configured grid defines {} — \
             did the grid settings change since `grid` ran?",
            art.scores.cols(),
            grid.k()
        )));
    }

    let oof = OofScoreMatrix {
        scores: art.scores,
        kind: art.kind,
        provenance: None,
        nonconverged_cells: art.nonconverged_cells,
    };
    let cv_accuracy = oof.per_model_accuracy(&art.targets);

    let formulation = config.combine.formulation;
    let (solved, _slacks): (CombinerWeights, _) = match formulation {
        Formulation::SingleLp => {
            let lp = build_lp_single(&oof.scores, &art.targets, config.lp_options())
                .map_err(classify_combine)?;
            solve_weights_lp(&lp).map_err(classify_combine)?
        }
        Formulation::BootstrapLp => {
            let oob_file = oob_path(config);
            let oob = artifact::read_oob(&oob_file).map_err(|e| {
                CliError::data(e.context(
                    "the bootstrap form needs oob_scores.csv; run `grid` with \
                     formulation = \"bootstrap_lp\" first",
                ))
            })?;
            warn_on_hash_mismatch(&oob_file, &oob.config_hash, &hash);
            if oob.instances != art.targets.len() {
                return Err(CliError::data(anyhow!(
                    "oob artifact covers {} instances but the score matrix has {}",
                    oob.instances,
                    art.targets.len()
                )));
            }
            let (tensor, oob_targets) = oob.to_tensor().map_err(CliError::data)?;
            for (i, (&a, &b)) in oob_targets.iter().zip(&art.targets).enumerate() {
                if a != 0 && a != b {
                    return Err(CliError::data(anyhow!(
                        "instance {i} has target {b} in the score matrix but {a} in the \
                         oob artifact"
                    )));
                }
            }
            let lp = build_lp_bootstrap(&tensor, &art.targets, config.lp_options())
                .map_err(classify_combine)?;
            solve_weights_lp(&lp).map_err(classify_combine)?
        }
        Formulation::Qp => solve_weights_qp(&oof.scores, &art.targets, config.qp_options())
            .map_err(classify_combine)?,
    };

    let best = best_model_index(&cv_accuracy);
    let models: Vec<ModelWeightRow> = (1..=grid.k())
        .map(|m| {
            let (cost, gamma) = grid.params(m);
            ModelWeightRow {
                model: m,
                cost,
                gamma,
                cv_accuracy: cv_accuracy[m - 1],
                weight: solved.weights[m - 1],
            }
        })
        .collect();
    let max_accuracy_weight = solved.weights[best];
    let weights_art = WeightsArtifact {
        stage: "combine-weights".into(),
        config_hash: hash,
        dataset: art.dataset_id,
        score_kind: score_kind_name(art.kind).into(),
        formulation,
        margin: solved.margin,
        cap: solved.cap,
        penalty_c: solved.penalty_c,
        objective_value: solved.objective_value,
        nonzero_count: solved.nonzero_count,
        max_accuracy_model: best + 1,
        max_accuracy_cv: cv_accuracy[best],
        max_accuracy_weight,
        max_accuracy_model_zero_weight: max_accuracy_weight < NONZERO_THRESHOLD,
        models,
    };
    let weights_file = weights_path(config);
    artifact::write_json(&weights_file, &weights_art).map_err(CliError::data)?;

    eprintln!(
        "combine: {} (margin {}) objective {:.6}",
        formulation_name(formulation),
        solved.margin,
        solved.objective_value
    );
    eprintln!("combine: {} of {} weights are nonzero", solved.nonzero_count, grid.k());
    for row in weights_art.models.iter().filter(|r| r.weight >= NONZERO_THRESHOLD) {
        eprintln!(
            "combine:   model {:>3} (C={}, g={}) cv_accuracy {:.4} weight {:.4}",
            row.model, row.cost, row.gamma, row.cv_accuracy, row.weight
        );
    }
    eprintln!(
        "combine: max-accuracy model {} (cv {:.4}) received {} weight",
        best + 1,
        cv_accuracy[best],
        if weights_art.max_accuracy_model_zero_weight { "zero" } else { "nonzero" }
    );
    eprintln!("combine: wrote {} in {:.1}s", weights_file.display(), start.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_evaluate(
    config: &RunConfig,
    scores_override: Option<&Path>,
    weights_override: Option<&Path>,
) -> CliResult<()> {
    let start = Instant::now();
    let hash = config.config_hash();
    let scores_file = scores_override.map_or_else(|| scores_path(config), Path::to_path_buf);
    let weights_file = weights_override.map_or_else(|| weights_path(config), Path::to_path_buf);
    let art = artifact::read_scores(&scores_file).map_err(CliError::data)?;
    let weights = artifact::read_weights(&weights_file).map_err(CliError::data)?;
    warn_on_hash_mismatch(&scores_file, &art.config_hash, &hash);
    warn_on_hash_mismatch(&weights_file, &weights.config_hash, &hash);

    let k = art.scores.cols();
    if weights.models.len() != k {
        return Err(CliError::data(anyhow!(
            "weights cover {} models but the score matrix has {k} columns",
            weights.models.len()
        )));
    }
    for (j, row) in weights.models.iter().enumerate() {
        if row.model != j + 1 {
            return Err(CliError::data(anyhow!(
                "weights entry {j} is for model {}, expected model {}",
                row.model,
                j + 1
            )));
        }
    }

    let w: Vec<f64> = weights.models.iter().map(|r| r.weight).collect();
    let n = art.scores.rows();
    let combined: Vec<f64> = (0..n).map(|i| optcomb::matrix::dot(art.scores.row(i), &w)).collect();

    let oof = OofScoreMatrix {
        scores: art.scores,
        kind: art.kind,
        provenance: None,
        nonconverged_cells: art.nonconverged_cells,
    };
    let cv_accuracy = oof.per_model_accuracy(&art.targets);
    let best = best_model_index(&cv_accuracy);
    if best + 1 != weights.max_accuracy_model {
        eprintln!(
            "warning: weights artifact says model {} is best, scores say {} — using {}",
            weights.max_accuracy_model,
            best + 1,
            best + 1
        );
    }
    let best_scores = oof.scores.col(best);

    fn classifier_metrics(
        targets: &[i8],
        binary: &[f64],
        scores: &[f64],
    ) -> CliResult<(ClassifierMetrics, optcomb::metrics::RocCurve, optcomb::metrics::IsotonicModel)>
    {
        let predictions: Vec<i8> = scores.iter().map(|&s| if s >= 0.0 { 1 } else { -1 }).collect();
        let acc = accuracy(targets, &predictions).map_err(CliError::data)?;
        let roc = roc_auc(targets, scores).map_err(CliError::data)?;
        let calibrator = isotonic_fit(scores, binary).map_err(CliError::data)?;
        let mae = calibration_mae(&calibrator, scores, binary).map_err(CliError::data)?;
        Ok((
            ClassifierMetrics { accuracy: acc, auc: roc.auc, calibration_mae: mae },
            roc,
            calibrator,
        ))
    }
    let binary = to_binary_targets(&art.targets);
    let (combined_metrics, combined_roc, combined_cal) =
        classifier_metrics(&art.targets, &binary, &combined)?;
    let (single_metrics, single_roc, single_cal) =
        classifier_metrics(&art.targets, &binary, &best_scores)?;
    let (best_cost, best_gamma) = {
        let row = &weights.models[best];
        (row.cost, row.gamma)
    };

    let metrics = MetricsArtifact {
        stage: "evaluate-metrics".into(),
        config_hash: hash.clone(),
        dataset: art.dataset_id,
        instances: n,
        models: k,
        combined: combined_metrics,
        best_single: BestSingleMetrics {
            model: best + 1,
            cost: best_cost,
            gamma: best_gamma,
            accuracy: single_metrics.accuracy,
            auc: single_metrics.auc,
            calibration_mae: single_metrics.calibration_mae,
        },
        auc_gap: combined_metrics.auc - single_metrics.auc,
        calibration_mae_gap: combined_metrics.calibration_mae - single_metrics.calibration_mae,
    };
    let metrics_file = metrics_path(config);
    artifact::write_json(&metrics_file, &metrics).map_err(CliError::data)?;

    let dir = &config.output.dir;
    artifact::write_roc(&dir.join("roc_combined.csv"), &hash, "combined", &combined_roc)
        .map_err(CliError::data)?;
    artifact::write_roc(&dir.join("roc_best_single.csv"), &hash, "best_single", &single_roc)
        .map_err(CliError::data)?;
    artifact::write_reliability(
        &dir.join("reliability_combined.csv"),
        &hash,
        "combined",
        &combined_cal,
    )
    .map_err(CliError::data)?;
    artifact::write_reliability(
        &dir.join("reliability_best_single.csv"),
        &hash,
        "best_single",
        &single_cal,
    )
    .map_err(CliError::data)?;

    eprintln!(
        "evaluate: combined    accuracy {:.4}  auc {:.5}  calibration_mae {:.4}",
        combined_metrics.accuracy, combined_metrics.auc, combined_metrics.calibration_mae
    );
    eprintln!(
        "evaluate: best single accuracy {:.4}  auc {:.5}  calibration_mae {:.4}  (model {})",
        single_metrics.accuracy,
        single_metrics.auc,
        single_metrics.calibration_mae,
        best + 1
    );
    eprintln!(
        "evaluate: wrote {} (+ roc/reliability CSVs) in {:.1}s",
        metrics_file.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bvlab
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PointParams {
    pub p: f64,
    pub q: f64,
    pub trials: Option<u64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurveParams {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OnennParams {
    pub p: f64,
    pub empirical_trials: Option<u64>,
    pub seed: u64,
}

#[derive(Serialize)]
struct PointOut {
    stage: &'static str,
    config_hash: String,
    params: PointParams,
    report: BvReport,
}

#[derive(Serialize)]
struct OnennOut {
    stage: &'static str,
    config_hash: String,
    params: OnennParams,
    /// Decomposition under the coupled channel y = t (prediction equals the
    /// realized label, as for a 1NN rule at a duplicated training point).
    analytic: BvReport,
    /// The asymptotic law 2·BE − 2·BE² at this point.
    law_value: f64,
    empirical: Option<OneNnCheck>,
}

/// Hash of the parameter set, playing the role the config hash plays for the
/// pipeline verbs.
fn params_hash<T: Serialize>(params: &T) -> String {
    let canonical = serde_json::to_string(params).expect("params serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("hex digits");
    }
    hex
}

fn emit(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))
                        .map_err(CliError::data)?;
                }
            }
            std::fs::write(path, content)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(CliError::data)?;
            eprintln!("bvlab: wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn json_content<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

pub fn cmd_bvlab_point(params: PointParams, out: Option<&Path>) -> CliResult<()> {
    let world = PointWorld::independent(params.p, params.q).map_err(CliError::config)?;
    let report = match params.trials {
        Some(trials) => {
            monte_carlo_decomposition(&world, trials, params.seed).map_err(CliError::config)?
        }
        None => analytic_decomposition(&world).map_err(CliError::config)?,
    };
    let wrapped =
        PointOut { stage: "bvlab-point", config_hash: params_hash(&params), params, report };
    emit(out, &json_content(&wrapped))
}

pub fn cmd_bvlab_curve(params: CurveParams, out: Option<&Path>) -> CliResult<()> {
    if !(params.step > 0.0) {
        return Err(CliError::config(anyhow!("step must be positive, got {}", params.step)));
    }
    let mut grid = Vec::new();
    let mut be = params.start;
    while be <= params.end + 1e-12 {
        grid.push(be.min(params.end));
        be += params.step;
    }
    let curve = one_nn_curve(&grid).map_err(CliError::config)?;
    let mut content = String::new();
    writeln!(content, "# stage: bvlab-curve").expect("write to string");
    writeln!(content, "# config: {}", params_hash(&params)).expect("write to string");
    writeln!(content, "be,expected_error").expect("write to string");
    for (be, err) in curve {
        writeln!(content, "{be},{err}").expect("write to string");
    }
    emit(out, &content)
}

pub fn cmd_bvlab_onenn(params: OnennParams, out: Option<&Path>) -> CliResult<()> {
    let world = PointWorld::one_nn(params.p).map_err(CliError::config)?;
    let analytic = dependent_decomposition(&world).map_err(CliError::config)?;
    let be = analytic.bayes_error;
    let empirical = match params.empirical_trials {
        Some(trials) => {
            Some(empirical_1nn_check(params.p, trials, params.seed).map_err(CliError::config)?)
        }
        None => None,
    };
    let wrapped = OnennOut {
        stage: "bvlab-onenn",
        config_hash: params_hash(&params),
        params,
        analytic,
        law_value: 2.0 * be - 2.0 * be * be,
        empirical,
    };
    emit(out, &json_content(&wrapped))
}
