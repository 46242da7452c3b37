//! Weight-finding formulations for linear classifier combination over
//! out-of-sample scores, and prediction with the combined classifier.
//!
//! Three formulations are supported:
//!
//! * single-form hinge LP — minimize Σξ_i subject to t_i(z_i·w) ≥ margin − ξ_i
//!   over the (optionally capped) probability simplex;
//! * bootstrap hinge LP — one slack per valid (instance, replicate) pair;
//! * quadratic form — minimize ½‖w‖² + C·Σ max(0, margin − t_i z_i·w) over the
//!   simplex by projected subgradient.

use crate::grid::OobScoreTensor;
use crate::lp::{project_simplex, solve_lp, LpConstraint, LpError, LpProblem, LpStatus, Relation};
use crate::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weights below this threshold count as zero in sparsity reports. Simplex
/// optima are vertex solutions, so true zeros only carry solver-tolerance
/// noise.
pub const NONZERO_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CombineError {
    #[error("score matrix has no rows or no columns")]
    Empty,
    #[error("score matrix has {rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("cap {cap} is infeasible: K·cap < 1 with K = {k}")]
    CapInfeasible { cap: f64, k: usize },
    #[error("penalty must be positive, got {value}")]
    BadPenalty { value: f64 },
    #[error("instances never out-of-bag: {instances:?}")]
    NeverOutOfBag { instances: Vec<usize> },
    #[error("LP solver failed: {0}")]
    Lp(#[from] LpError),
    #[error("internal solver state: {0}")]
    Internal(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    SingleLp,
    BootstrapLp,
    Qp,
}

/// Optimal combination weights with full provenance of how they were found.
#[derive(Clone, Debug, Serialize)]
pub struct CombinerWeights {
    pub weights: Vec<f64>,
    pub formulation: Formulation,
    pub margin: f64,
    pub cap: Option<f64>,
    pub penalty_c: Option<f64>,
    pub objective_value: f64,
    pub nonzero_count: usize,
}

impl CombinerWeights {
    /// Combined score z·w and its label; score 0 maps to +1 (a zero-score
    /// prediction already counts as a miss under the margin training rule).
    pub fn predict(&self, score_row: &[f64]) -> (f64, i8) {
        assert_eq!(score_row.len(), self.weights.len(), "score row length mismatch");
        let score = crate::matrix::dot(score_row, &self.weights);
        (score, if score >= 0.0 { 1 } else { -1 })
    }
}

/// Slack values at the reported weights, recomputed as
/// ξ_j = max(0, margin − t_j·(z_j·w)) in LP row order.
#[derive(Clone, Debug, Serialize)]
pub struct SlackVector {
    pub xi: Vec<f64>,
}

/// Knobs shared by both LP builders.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LpOptions {
    /// Required classification margin on the combined score.
    pub margin: f64,
    /// Optional per-weight upper bound (shrinks weights toward uniform).
    pub cap: Option<f64>,
    /// Keep the Σw = 1 constraint (default on).
    pub sum_to_one: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { margin: 0.5, cap: None, sum_to_one: true }
    }
}

/// An assembled weight-finding LP plus everything needed to audit its
/// solution: each slack variable's (target, score row) pair in LP row order.
#[derive(Clone, Debug)]
pub struct CombinerLp {
    pub problem: LpProblem,
    pub k: usize,
    pub options: LpOptions,
    pub formulation: Formulation,
    slack_rows: Vec<(f64, Vec<f64>)>,
}

fn hinge_slacks(rows: &[(f64, Vec<f64>)], w: &[f64], margin: f64) -> Vec<f64> {
    rows.iter().map(|(t, z)| (margin - t * crate::matrix::dot(z, w)).max(0.0)).collect()
}

fn assemble_lp(
    slack_rows: Vec<(f64, Vec<f64>)>,
    k: usize,
    options: LpOptions,
    formulation: Formulation,
) -> Result<CombinerLp, CombineError> {
    if let Some(cap) = options.cap {
        if options.sum_to_one && cap * (k as f64) < 1.0 - 1e-12 {
            return Err(CombineError::CapInfeasible { cap, k });
        }
    }
    let s = slack_rows.len();
    let nvars = k + s;
    let mut objective = vec![0.0; nvars];
    objective[k..].fill(1.0);

    let mut constraints = Vec::with_capacity(s + 1);
    for (j, (t, z)) in slack_rows.iter().enumerate() {
        let mut coeffs = vec![0.0; nvars];
        for (c, zk) in coeffs[..k].iter_mut().zip(z) {
            *c = t * zk;
        }
        coeffs[k + j] = 1.0;
        constraints.push(LpConstraint { coeffs, relation: Relation::Ge, rhs: options.margin });
    }
    if options.sum_to_one {
        let mut coeffs = vec![0.0; nvars];
        coeffs[..k].fill(1.0);
        constraints.push(LpConstraint { coeffs, relation: Relation::Eq, rhs: 1.0 });
    }

    let mut bounds = vec![(0.0, options.cap); k];
    bounds.extend(std::iter::repeat_n((0.0, None), s));

    let problem = LpProblem { objective, constraints, bounds };
    problem.validate().map_err(CombineError::Lp)?;
    Ok(CombinerLp { problem, k, options, formulation, slack_rows })
}

/// Build the single-form hinge LP: variables (w_1..w_K, ξ_1..ξ_N), objective
/// Σξ, one margin constraint per instance.
pub fn build_lp_single(
    scores: &Matrix,
    targets: &[i8],
    options: LpOptions,
) -> Result<CombinerLp, CombineError> {
    if scores.rows() == 0 || scores.cols() == 0 {
        return Err(CombineError::Empty);
    }
    if scores.rows() != targets.len() {
        return Err(CombineError::LengthMismatch { rows: scores.rows(), targets: targets.len() });
    }
    let slack_rows: Vec<(f64, Vec<f64>)> =
        (0..scores.rows()).map(|i| (f64::from(targets[i]), scores.row(i).to_vec())).collect();
    assemble_lp(slack_rows, scores.cols(), options, Formulation::SingleLp)
}

/// Build the bootstrap hinge LP: one slack per (instance, replicate) pair
/// where the instance was out-of-bag, ordered replicate-major. Every instance
/// must be out-of-bag at least once.
pub fn build_lp_bootstrap(
    tensor: &OobScoreTensor,
    targets: &[i8],
    options: LpOptions,
) -> Result<CombinerLp, CombineError> {
    let Some(first) = tensor.replicates.first() else {
        return Err(CombineError::Empty);
    };
    if first.rows() == 0 || first.cols() == 0 {
        return Err(CombineError::Empty);
    }
    if first.rows() != targets.len() {
        return Err(CombineError::LengthMismatch { rows: first.rows(), targets: targets.len() });
    }
    let n = targets.len();
    let never_oob: Vec<usize> = (0..n).filter(|&i| !tensor.masks.iter().any(|m| m[i])).collect();
    if !never_oob.is_empty() {
        return Err(CombineError::NeverOutOfBag { instances: never_oob });
    }

    let mut slack_rows = Vec::new();
    for (d, scores) in tensor.replicates.iter().enumerate() {
        for i in 0..n {
            if tensor.masks[d][i] {
                slack_rows.push((f64::from(targets[i]), scores.row(i).to_vec()));
            }
        }
    }
    assemble_lp(slack_rows, first.cols(), options, Formulation::BootstrapLp)
}

/// Solve an assembled hinge LP. The returned slack vector is recomputed from
/// the weights (and checked against the LP's own slack values); the reported
/// objective is the recomputed total slack.
pub fn solve_weights_lp(lp: &CombinerLp) -> Result<(CombinerWeights, SlackVector), CombineError> {
    let k = lp.k;

    // cap·K = 1 with Σw = 1 pins the feasible set to the single point
    // w = (cap, …, cap); return it directly so the result is exactly uniform.
    if let Some(cap) = lp.options.cap {
        if lp.options.sum_to_one && (cap * k as f64 - 1.0).abs() <= 1e-12 {
            let weights = vec![cap; k];
            let xi = hinge_slacks(&lp.slack_rows, &weights, lp.options.margin);
            let objective_value = xi.iter().sum();
            return Ok((
                CombinerWeights {
                    weights,
                    formulation: lp.formulation,
                    margin: lp.options.margin,
                    cap: lp.options.cap,
                    penalty_c: None,
                    objective_value,
                    nonzero_count: k,
                },
                SlackVector { xi },
            ));
        }
    }

    let solution = solve_lp(&lp.problem)?;
    match solution.status {
        LpStatus::Optimal => {}
        // A slack LP is always feasible and bounded below by 0.
        LpStatus::Infeasible => return Err(CombineError::Internal("hinge LP reported infeasible")),
        LpStatus::Unbounded => return Err(CombineError::Internal("hinge LP reported unbounded")),
    }

    let weights = solution.x[..k].to_vec();
    let lp_slacks = &solution.x[k..];
    let xi = hinge_slacks(&lp.slack_rows, &weights, lp.options.margin);
    for (j, (rec, lp_xi)) in xi.iter().zip(lp_slacks).enumerate() {
        assert!(
            (rec - lp_xi).abs() <= 1e-7 + 1e-9 * lp_xi.abs(),
            "slack {j} inconsistent: recomputed {rec}, LP {lp_xi}"
        );
    }
    let objective_value: f64 = xi.iter().sum();
    assert!(
        (objective_value - solution.objective_value).abs()
            <= 1e-6 * (1.0 + solution.objective_value.abs()),
        "objective drift: {objective_value} vs LP {}",
        solution.objective_value
    );

    let nonzero_count = weights.iter().filter(|&&w| w > NONZERO_THRESHOLD).count();
    Ok((
        CombinerWeights {
            weights,
            formulation: lp.formulation,
            margin: lp.options.margin,
            cap: lp.options.cap,
            penalty_c: None,
            objective_value,
            nonzero_count,
        },
        SlackVector { xi },
    ))
}

/// Knobs for the quadratic formulation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QpOptions {
    /// Hinge penalty C; small values shrink weights toward uniform.
    pub penalty_c: f64,
    pub margin: f64,
    pub iterations: usize,
}

impl QpOptions {
    pub fn new(penalty_c: f64) -> Self {
        QpOptions { penalty_c, margin: 1.0, iterations: 100_000 }
    }
}

/// Minimize f(w) = ½‖w‖² + C·Σ max(0, margin − t_i z_i·w) over the simplex by
/// projected subgradient with step 1/iter (the quadratic term is 1-strongly
/// convex), keeping the best iterate seen. Deterministic.
pub fn solve_weights_qp(
    scores: &Matrix,
    targets: &[i8],
    options: QpOptions,
) -> Result<(CombinerWeights, SlackVector), CombineError> {
    if scores.rows() == 0 || scores.cols() == 0 {
        return Err(CombineError::Empty);
    }
    if scores.rows() != targets.len() {
        return Err(CombineError::LengthMismatch { rows: scores.rows(), targets: targets.len() });
    }
    if !(options.penalty_c > 0.0) {
        return Err(CombineError::BadPenalty { value: options.penalty_c });
    }
    let (n, k) = (scores.rows(), scores.cols());
    let c = options.penalty_c;
    let margin = options.margin;

    // Margins m_i = t_i·(z_i·w) drive both the objective and the subgradient.
    let margins = |w: &[f64]| -> Vec<f64> {
        (0..n).map(|i| f64::from(targets[i]) * crate::matrix::dot(scores.row(i), w)).collect()
    };
    let objective = |w: &[f64], m: &[f64]| -> f64 {
        0.5 * w.iter().map(|x| x * x).sum::<f64>()
            + c * m.iter().map(|&mi| (margin - mi).max(0.0)).sum::<f64>()
    };

    let mut w = vec![1.0 / k as f64; k];
    let mut m = margins(&w);
    let mut best_w = w.clone();
    let mut best_f = objective(&w, &m);

    for iter in 1..=options.iterations {
        let mut grad = w.clone();
        for i in 0..n {
            if m[i] < margin {
                let t = f64::from(targets[i]);
                for (g, z) in grad.iter_mut().zip(scores.row(i)) {
                    *g -= c * t * z;
                }
            }
        }
        let step = 1.0 / iter as f64;
        let moved: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
        w = project_simplex(&moved);
        m = margins(&w);
        let f = objective(&w, &m);
        if f < best_f {
            best_f = f;
            best_w.copy_from_slice(&w);
        }
    }

    let slack_rows: Vec<(f64, Vec<f64>)> =
        (0..n).map(|i| (f64::from(targets[i]), scores.row(i).to_vec())).collect();
    let xi = hinge_slacks(&slack_rows, &best_w, margin);
    let nonzero_count = best_w.iter().filter(|&&x| x > NONZERO_THRESHOLD).count();
    Ok((
        CombinerWeights {
            weights: best_w,
            formulation: Formulation::Qp,
            margin,
            cap: None,
            penalty_c: Some(c),
            objective_value: best_f,
            nonzero_count,
        },
        SlackVector { xi },
    ))
}
