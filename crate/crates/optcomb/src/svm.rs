//! RBF-kernel soft-margin SVM trained by sequential minimal optimization
//! (SMO). Features may optionally be z-score standardized inside training
//! using statistics of the training portion only (off by default: the
//! experiment grids in this crate pair small kernel widths with raw feature
//! ranges); when enabled, the stored support vectors are pre-scaled.
//!
//! The working-pair selection follows the classic two-loop scheme: an outer
//! sweep alternating between all points and the non-bound subset, and a
//! second-choice heuristic that first maximizes |E1 − E2| over non-bound
//! points, then falls back to seeded-rotation scans. The fallback rotation
//! uses a fixed-seed generator, so training is fully deterministic.

use crate::dataset::LabeledDataset;
use crate::Matrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative step-size floor below which a joint-optimization step is rejected.
const STEP_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training set contains a single class; need both -1 and +1")]
    SingleClass,
    #[error("hyperparameter {name} must be positive, got {value}")]
    NonPositiveHyperparameter { name: &'static str, value: f64 },
}

/// Optimizer knobs shared by every model of a grid.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainParams {
    /// KKT violation tolerance.
    pub tol: f64,
    /// Outer sweep budget; exhausted budgets yield `converged = false`.
    pub max_passes: usize,
    /// Z-score features with training-portion statistics before training.
    pub scale_features: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        // 4000 sweeps is enough for every cell of the default grid on the
        // bundled datasets; the worst cell (large C, large gamma) needs ~3000.
        TrainParams { tol: 1e-3, max_passes: 4000, scale_features: false }
    }
}

/// A trained soft-margin RBF SVM. `support_vectors` hold coordinates in the
/// training scale (pre-standardized when scaling was enabled); queries pass
/// through `scaler` before kernel evaluation, which is the identity map
/// (0, 1) for unscaled models.
#[derive(Clone, Debug)]
pub struct SvmModel {
    pub support_vectors: Matrix,
    /// α_i · t_i for each support vector (nonzero multipliers only).
    pub alphas_times_targets: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub cost: f64,
    /// Per-feature (mean, stddev) of the training portion; stddev 0 maps to 1.
    pub scaler: Vec<(f64, f64)>,
    /// False when the optimizer hit its sweep budget before meeting the KKT
    /// tolerance; the model is the best iterate found.
    pub converged: bool,
}

impl SvmModel {
    /// Raw decision value Σ_i (α_i t_i)·exp(−γ‖x_scaled − sv_i‖²) + bias.
    /// Predicted label is +1 iff the score is ≥ 0.
    pub fn decision_score(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.scaler.len(), "query dimension mismatch");
        let scaled: Vec<f64> = x.iter().zip(&self.scaler).map(|(v, &(m, s))| (v - m) / s).collect();
        let mut score = self.bias;
        for (i, &at) in self.alphas_times_targets.iter().enumerate() {
            let sv = self.support_vectors.row(i);
            let d2: f64 = scaled.iter().zip(sv).map(|(a, b)| (a - b) * (a - b)).sum();
            score += at * (-self.gamma * d2).exp();
        }
        score
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.decision_score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Per-feature (mean, population stddev), with zero stddev replaced by 1 so
/// constant columns pass through unchanged.
fn fit_scaler(x: &Matrix) -> Vec<(f64, f64)> {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let mean = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let var = (0..x.rows()).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (mean, if std > 0.0 { std } else { 1.0 })
        })
        .collect()
}

fn apply_scaler(x: &Matrix, scaler: &[(f64, f64)]) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..x.rows())
        .map(|i| x.row(i).iter().zip(scaler).map(|(v, &(m, s))| (v - m) / s).collect())
        .collect();
    Matrix::from_rows(&rows)
}

/// Train an RBF SVM with box constraint `cost` and kernel width `gamma`
/// under the given optimizer knobs. If the sweep budget is exhausted, the
/// best iterate is returned with `converged = false`.
pub fn train_svm(
    train: &LabeledDataset,
    cost: f64,
    gamma: f64,
    params: &TrainParams,
) -> Result<SvmModel, SvmError> {
    if !(cost > 0.0) {
        return Err(SvmError::NonPositiveHyperparameter { name: "cost", value: cost });
    }
    if !(gamma > 0.0) {
        return Err(SvmError::NonPositiveHyperparameter { name: "gamma", value: gamma });
    }
    let (pos, neg) = train.class_counts();
    if pos == 0 || neg == 0 {
        return Err(SvmError::SingleClass);
    }

    let scaler = if params.scale_features {
        fit_scaler(&train.features)
    } else {
        vec![(0.0, 1.0); train.features.cols()]
    };
    let scaled = apply_scaler(&train.features, &scaler);
    let (alphas, bias, converged) =
        smo_train(&scaled, &train.targets, cost, gamma, params.tol, params.max_passes);

    let sv_indices: Vec<usize> = (0..alphas.len()).filter(|&i| alphas[i] > 0.0).collect();
    let sv_rows: Vec<Vec<f64>> = sv_indices.iter().map(|&i| scaled.row(i).to_vec()).collect();
    let alphas_times_targets: Vec<f64> =
        sv_indices.iter().map(|&i| alphas[i] * f64::from(train.targets[i])).collect();

    debug_assert!(
        alphas.iter().all(|&a| (-1e-8..=cost + 1e-8).contains(&a)),
        "multiplier escaped the box"
    );
    debug_assert!(alphas_times_targets.iter().sum::<f64>().abs() <= 1e-6, "dual equality violated");

    let support_vectors = if sv_rows.is_empty() {
        Matrix::zeros(0, scaled.cols())
    } else {
        Matrix::from_rows(&sv_rows)
    };
    Ok(SvmModel { support_vectors, alphas_times_targets, bias, gamma, cost, scaler, converged })
}

/// Core SMO loop on pre-scaled features. Returns (alphas, bias, converged).
fn smo_train(
    x: &Matrix,
    t: &[i8],
    cost: f64,
    gamma: f64,
    tol: f64,
    max_passes: usize,
) -> (Vec<f64>, f64, bool) {
    let n = x.rows();
    let mut smo = Smo {
        x,
        t,
        cost,
        gamma,
        tol,
        alpha: vec![0.0; n],
        // f(x_i) = 0 initially, so E_i = f(x_i) − t_i = −t_i.
        errors: t.iter().map(|&ti| -f64::from(ti)).collect(),
        bias: 0.0,
        kernel_rows: vec![None; n],
        rng: ChaCha8Rng::seed_from_u64(0x53_4d_4f),
    };

    let mut examine_all = true;
    let mut converged = false;
    for _ in 0..max_passes {
        let mut changed = 0usize;
        if examine_all {
            for i in 0..n {
                changed += smo.examine(i);
            }
        } else {
            for i in 0..n {
                if smo.is_non_bound(i) {
                    changed += smo.examine(i);
                }
            }
        }
        if examine_all {
            if changed == 0 {
                converged = true;
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    (smo.alpha, smo.bias, converged)
}

struct Smo<'a> {
    x: &'a Matrix,
    t: &'a [i8],
    cost: f64,
    gamma: f64,
    tol: f64,
    alpha: Vec<f64>,
    /// E_i = f(x_i) − t_i, kept exact under every accepted step.
    errors: Vec<f64>,
    bias: f64,
    kernel_rows: Vec<Option<Box<[f64]>>>,
    rng: ChaCha8Rng,
}

impl Smo<'_> {
    fn is_non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.cost
    }

    fn ensure_row(&mut self, i: usize) {
        if self.kernel_rows[i].is_none() {
            let xi = self.x.row(i);
            let row: Vec<f64> = (0..self.x.rows())
                .map(|j| {
                    let xj = self.x.row(j);
                    let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-self.gamma * d2).exp()
                })
                .collect();
            self.kernel_rows[i] = Some(row.into_boxed_slice());
        }
    }

    /// Examine point i2 for a KKT violation; on violation try partners in the
    /// standard preference order. Returns 1 if a step was taken.
    fn examine(&mut self, i2: usize) -> usize {
        let n = self.x.rows();
        let t2 = f64::from(self.t[i2]);
        let a2 = self.alpha[i2];
        let r2 = self.errors[i2] * t2;
        let violates = (r2 < -self.tol && a2 < self.cost) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return 0;
        }

        // 1. Second-choice heuristic: non-bound partner maximizing |E1 − E2|.
        let e2 = self.errors[i2];
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if i != i2 && self.is_non_bound(i) {
                let gap = (self.errors[i] - e2).abs();
                if best.is_none_or(|(g, _)| gap > g) {
                    best = Some((gap, i));
                }
            }
        }
        if let Some((_, i1)) = best {
            if self.take_step(i1, i2) {
                return 1;
            }
        }

        // 2. Rotate through non-bound points from a seeded offset.
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if i1 != i2 && self.is_non_bound(i1) && self.take_step(i1, i2) {
                return 1;
            }
        }

        // 3. Rotate through everything from a seeded offset.
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if i1 != i2 && self.take_step(i1, i2) {
                return 1;
            }
        }
        0
    }

    /// Jointly optimize the pair (i1, i2). Returns true if the step was
    /// accepted and the state updated.
    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (t1, t2) = (f64::from(self.t[i1]), f64::from(self.t[i2]));
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = t1 * t2;

        // Feasible segment for the new α2 under the box and the equality.
        let (lo, hi) = if s < 0.0 {
            let d = a2 - a1;
            (d.max(0.0), (self.cost + d).min(self.cost))
        } else {
            let sum = a1 + a2;
            ((sum - self.cost).max(0.0), sum.min(self.cost))
        };
        if lo >= hi {
            return false;
        }

        self.ensure_row(i1);
        self.ensure_row(i2);
        let row1 = self.kernel_rows[i1].as_deref().unwrap();
        let row2 = self.kernel_rows[i2].as_deref().unwrap();
        let (k11, k12, k22) = (row1[i1], row1[i2], row2[i2]);
        let eta = k11 + k22 - 2.0 * k12;

        let a2_new = if eta > 0.0 {
            (a2 + t2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Zero/negative curvature along the segment (coincident points):
            // the dual gain Δ(δ) = t2(E1−E2)·δ − ½·eta·δ² is maximized at an
            // endpoint.
            let gain = |end: f64| {
                let delta = end - a2;
                t2 * (e1 - e2) * delta - 0.5 * eta * delta * delta
            };
            let (gl, gh) = (gain(lo), gain(hi));
            if gl > gh + 1e-12 {
                lo
            } else if gh > gl + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }
        let a1_new = (a1 + s * (a2 - a2_new)).clamp(0.0, self.cost);

        // Threshold keeping the freshly optimized pair KKT-consistent.
        let (d1, d2) = (a1_new - a1, a2_new - a2);
        let b1 = self.bias - e1 - t1 * d1 * k11 - t2 * d2 * k12;
        let b2 = self.bias - e2 - t1 * d1 * k12 - t2 * d2 * k22;
        let new_bias = if a1_new > 0.0 && a1_new < self.cost {
            b1
        } else if a2_new > 0.0 && a2_new < self.cost {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let bias_delta = new_bias - self.bias;

        for (i, err) in self.errors.iter_mut().enumerate() {
            *err += t1 * d1 * row1[i] + t2 * d2 * row2[i] + bias_delta;
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        self.bias = new_bias;
        true
    }
}
