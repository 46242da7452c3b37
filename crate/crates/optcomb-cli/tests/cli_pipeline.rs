//! End-to-end tests of the `optcomb` binary: pipeline artifacts, determinism,
//! documented exit codes, and the bvlab entry points.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_optcomb")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).args(args).current_dir(dir).output().expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed (status {:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Deterministic two-feature toy set: class +1 near (1, -0.6), class -1 near
/// (-1, 0.6), with integer-hash jitter so folds are not degenerate.
fn toy_csv(n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        let cls: f64 = if i % 2 == 0 { 1.0 } else { -1.0 };
        let a = ((i * 37 + 11) % 97) as f64 / 97.0 - 0.5;
        let b = ((i * 53 + 29) % 89) as f64 / 89.0 - 0.5;
        let x = cls + a;
        let y = -0.6 * cls + b;
        let label = if cls > 0.0 { 2 } else { 1 };
        s.push_str(&format!("{x},{y},{label}\n"));
    }
    s
}

/// A 3x3-model config over the toy data (cost 2^{-2,0,2}, gamma 2^{-3,-1,1}).
fn write_setup(dir: &Path, n: usize) -> PathBuf {
    fs::write(dir.join("toy.csv"), toy_csv(n)).unwrap();
    let config = dir.join("run.toml");
    fs::write(
        &config,
        "[dataset]\n\
         path = \"toy.csv\"\n\
         positive_label = \"2\"\n\
         negative_label = \"1\"\n\
         \n\
         [folds]\n\
         k = 5\n\
         seed = 42\n\
         \n\
         [grid]\n\
         cost_exponents = { start = -2, end = 2, step = 2 }\n\
         gamma_exponents = { start = -3, end = 1, step = 2 }\n\
         \n\
         [output]\n\
         dir = \"out\"\n",
    )
    .unwrap();
    config
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap())
        .unwrap_or_else(|e| panic!("{} is not valid JSON: {e}", path.display()))
}

fn comment_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    let prefix = format!("# {key}:");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("{} lacks `# {key}:`", path.display()))
}

#[test]
fn pipeline_artifacts_are_consistent_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_setup(dir.path(), 40);

    for out in ["out_a", "out_b"] {
        for verb in ["grid", "combine", "evaluate"] {
            let r = run_in(dir.path(), &[verb, "--config", "run.toml", "--output-dir", out]);
            assert_ok(&r, &format!("{verb} into {out}"));
        }
    }

    // Identical config (output location excluded from the hash) means every
    // artifact is byte-identical between the two runs.
    for file in [
        "scores.csv",
        "models.csv",
        "weights.json",
        "metrics.json",
        "roc_combined.csv",
        "roc_best_single.csv",
        "reliability_combined.csv",
        "reliability_best_single.csv",
    ] {
        let a = fs::read(dir.path().join("out_a").join(file)).unwrap();
        let b = fs::read(dir.path().join("out_b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }

    // Every stage stamps the same config hash.
    let out_a = dir.path().join("out_a");
    let hash = comment_value(&out_a.join("scores.csv"), "config");
    assert_eq!(hash.len(), 64);
    let weights = read_json(&out_a.join("weights.json"));
    let metrics = read_json(&out_a.join("metrics.json"));
    assert_eq!(weights["config_hash"], serde_json::Value::String(hash.clone()));
    assert_eq!(metrics["config_hash"], serde_json::Value::String(hash.clone()));
    assert_eq!(comment_value(&out_a.join("roc_combined.csv"), "config"), hash);
    assert_eq!(weights["stage"], "combine-weights");
    assert_eq!(metrics["stage"], "evaluate-metrics");

    // Weights live on the simplex.
    let w: Vec<f64> = weights["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["weight"].as_f64().unwrap())
        .collect();
    assert_eq!(w.len(), 9);
    assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    assert!(w.iter().all(|&x| x >= -1e-12));

    // The score matrix has one row per instance.
    let scores = fs::read_to_string(out_a.join("scores.csv")).unwrap();
    let data_rows = scores.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count() - 1;
    assert_eq!(data_rows, 40);
}

#[test]
fn leave_one_out_matrix_has_one_row_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    write_setup(dir.path(), 10);
    let r = run_in(dir.path(), &["grid", "--config", "run.toml", "--k", "10"]);
    assert_ok(&r, "LOO grid");
    let scores = fs::read_to_string(dir.path().join("out/scores.csv")).unwrap();
    let data_rows = scores.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count() - 1;
    assert_eq!(data_rows, 10);
}

#[test]
fn cap_at_one_over_k_yields_exactly_uniform_weights() {
    let dir = tempfile::tempdir().unwrap();
    write_setup(dir.path(), 40);
    // 4 costs x 2 gammas = 8 models, so 1/K = 0.125 is exact in binary.
    fs::write(
        dir.path().join("run8.toml"),
        "[dataset]\n\
         path = \"toy.csv\"\n\
         positive_label = \"2\"\n\
         negative_label = \"1\"\n\
         \n\
         [grid]\n\
         cost_exponents = { start = -2, end = 4, step = 2 }\n\
         gamma_exponents = { start = -3, end = -1, step = 2 }\n\
         \n\
         [combine]\n\
         cap = 0.125\n",
    )
    .unwrap();
    let r = run_in(dir.path(), &["grid", "--config", "run8.toml"]);
    assert_ok(&r, "grid");
    let r = run_in(dir.path(), &["combine", "--config", "run8.toml"]);
    assert_ok(&r, "combine with cap 1/8");
    let weights = read_json(&dir.path().join("out/weights.json"));
    let models = weights["models"].as_array().unwrap();
    assert_eq!(models.len(), 8);
    for m in models {
        assert_eq!(m["weight"].as_f64().unwrap(), 0.125, "weights must be exactly uniform");
    }
    assert_eq!(weights["nonzero_count"], 8);
}

#[test]
fn unit_weight_on_one_model_reproduces_its_metrics_exactly() {
    let dir = tempfile::tempdir().unwrap();
    write_setup(dir.path(), 40);
    assert_ok(&run_in(dir.path(), &["grid", "--config", "run.toml"]), "grid");
    assert_ok(&run_in(dir.path(), &["combine", "--config", "run.toml"]), "combine");

    // Craft a weight vector that puts everything on the best single model.
    let weights_path = dir.path().join("out/weights.json");
    let mut weights = read_json(&weights_path);
    let best = weights["max_accuracy_model"].as_u64().unwrap() as usize;
    let models = weights["models"].as_array_mut().unwrap();
    for m in models.iter_mut() {
        let is_best = m["model"].as_u64().unwrap() as usize == best;
        m["weight"] = serde_json::json!(if is_best { 1.0 } else { 0.0 });
    }
    let crafted = dir.path().join("unit_weights.json");
    fs::write(&crafted, serde_json::to_string_pretty(&weights).unwrap()).unwrap();

    let r = run_in(
        dir.path(),
        &[
            "evaluate",
            "--config",
            "run.toml",
            "--scores",
            "out/scores.csv",
            "--weights",
            "unit_weights.json",
            "--output-dir",
            "out_unit",
        ],
    );
    assert_ok(&r, "evaluate with unit weights");

    let metrics = read_json(&dir.path().join("out_unit/metrics.json"));
    let combined = &metrics["combined"];
    let single = &metrics["best_single"];
    for key in ["accuracy", "auc", "calibration_mae"] {
        assert_eq!(
            combined[key].as_f64().unwrap(),
            single[key].as_f64().unwrap(),
            "{key} must match exactly when all weight sits on the best model"
        );
    }
    assert_eq!(metrics["auc_gap"].as_f64().unwrap(), 0.0);
}

#[test]
fn bootstrap_form_round_trips_through_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_setup(dir.path(), 40);
    // Enough replicates that no instance stays in-bag everywhere
    // (P ~ 0.632^D per instance).
    let args = ["--config", "run.toml", "--formulation", "bootstrap_lp", "--replicates", "20"];
    let mut grid_args = vec!["grid"];
    grid_args.extend_from_slice(&args);
    assert_ok(&run_in(dir.path(), &grid_args), "bootstrap grid");
    assert!(dir.path().join("out/oob_scores.csv").exists());
    let mut combine_args = vec!["combine"];
    combine_args.extend_from_slice(&args);
    assert_ok(&run_in(dir.path(), &combine_args), "bootstrap combine");
    let weights = read_json(&dir.path().join("out/weights.json"));
    assert_eq!(weights["formulation"], "bootstrap_lp");
    let total: f64 =
        weights["models"].as_array().unwrap().iter().map(|m| m["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-9);
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_setup(dir.path(), 40);

    // Config error: fold count below 2.
    let r = run_in(dir.path(), &["grid", "--config", "run.toml", "--k", "1"]);
    assert_eq!(r.status.code(), Some(2), "k=1 must be a config error");

    // Config error: malformed TOML.
    fs::write(&config, "this is not toml [").unwrap();
    let r = run_in(dir.path(), &["grid", "--config", "run.toml"]);
    assert_eq!(r.status.code(), Some(2));
    write_setup(dir.path(), 40);

    // Data error: unparseable feature cell.
    fs::write(dir.path().join("toy.csv"), "0.5,oops,2\n1.0,2.0,1\n").unwrap();
    let r = run_in(dir.path(), &["grid", "--config", "run.toml"]);
    assert_eq!(r.status.code(), Some(3), "bad cell must be a data error");

    // Data error: combine before grid has produced a matrix.
    write_setup(dir.path(), 40);
    let r = run_in(dir.path(), &["combine", "--config", "run.toml", "--output-dir", "nowhere"]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn bvlab_reports_match_documented_examples() {
    let dir = tempfile::tempdir().unwrap();

    let r = run_in(dir.path(), &["bvlab", "point", "--p", "0.8", "--q", "0.7"]);
    assert_ok(&r, "bvlab point");
    let report: serde_json::Value = serde_json::from_slice(&r.stdout).expect("point emits JSON");
    assert!((report["report"]["expected_loss_ind"].as_f64().unwrap() - 0.38).abs() <= 1e-12);
    assert_eq!(report["report"]["bias"], 0);

    let r = run_in(dir.path(), &["bvlab", "onenn", "--p", "0.5"]);
    assert_ok(&r, "bvlab onenn");
    let report: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["analytic"]["expected_loss_dep"].as_f64().unwrap(), 0.0);
    assert_eq!(report["analytic"]["expected_loss_ind"].as_f64().unwrap(), 0.5);
    assert_eq!(report["law_value"].as_f64().unwrap(), 0.5);

    let out = dir.path().join("curve.csv");
    let r =
        run_in(dir.path(), &["bvlab", "curve", "--step", "0.005", "--out", out.to_str().unwrap()]);
    assert_ok(&r, "bvlab curve");
    let text = fs::read_to_string(&out).unwrap();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("be,")) {
        let (be, err) = line.split_once(',').unwrap();
        let (be, err): (f64, f64) = (be.parse().unwrap(), err.parse().unwrap());
        assert!(err <= 2.0 * be + 1e-15, "curve must stay below twice the Bayes error");
        rows += 1;
    }
    assert_eq!(rows, 101);

    // Probabilities outside [0,1] are config errors.
    let r = run_in(dir.path(), &["bvlab", "point", "--p", "1.5", "--q", "0.5"]);
    assert_eq!(r.status.code(), Some(2));
}
