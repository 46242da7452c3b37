//! Evaluation metrics: accuracy, ROC/AUC, isotonic (PAV) calibration with its
//! mean-absolute-error diagnostic, and the variance of score-label residuals.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need both classes present")]
    SingleClass,
    #[error("binary target at index {index} is {value}, expected 0 or 1")]
    BadTarget { index: usize, value: f64 },
    #[error("need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
}

/// ROC curve from a descending-threshold sweep with tied scores grouped,
/// plus its area (trapezoidal rule, which equals the Mann-Whitney statistic).
#[derive(Clone, Debug, Serialize)]
pub struct RocCurve {
    /// (false_positive_rate, true_positive_rate) points from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Nondecreasing least-squares fit of binary targets against scores.
/// Prediction is stepwise-constant: the fitted value of the largest
/// breakpoint not exceeding the query, extended flat beyond both ends.
#[derive(Clone, Debug, Serialize)]
pub struct IsotonicModel {
    /// Distinct score values, ascending.
    pub breakpoints: Vec<f64>,
    /// Fitted values (in [0,1]), nondecreasing, one per breakpoint.
    pub fitted: Vec<f64>,
}

/// Fraction of positions where `labels[i] == predictions[i]`.
pub fn accuracy(labels: &[i8], predictions: &[i8]) -> Result<f64, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if labels.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch { left: labels.len(), right: predictions.len() });
    }
    let hits = labels.iter().zip(predictions).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// ROC curve and AUC for ±1 labels scored by real values (higher = more
/// positive). Requires both classes. AUC equals the probability that a random
/// positive outscores a random negative, counting ties as 1/2.
pub fn roc_auc(labels: &[i8], scores: &[f64]) -> Result<RocCurve, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if labels.len() != scores.len() {
        return Err(MetricsError::LengthMismatch { left: labels.len(), right: scores.len() });
    }
    let npos = labels.iter().filter(|&&t| t > 0).count();
    let nneg = labels.len() - npos;
    if npos == 0 || nneg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));

    let mut points = Vec::with_capacity(labels.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        // Consume the whole tie group at this threshold.
        let score = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == score {
            if labels[order[idx]] > 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        points.push((fp as f64 / nneg as f64, tp as f64 / npos as f64));
    }

    let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

fn check_binary_targets(targets: &[f64]) -> Result<(), MetricsError> {
    for (index, &value) in targets.iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(MetricsError::BadTarget { index, value });
        }
    }
    Ok(())
}

/// Pool-adjacent-violators isotonic regression of `{0,1}` targets on scores.
/// Tied scores are pooled into one weighted point before the PAV pass, so the
/// fit is a function of the score value alone.
pub fn isotonic_fit(scores: &[f64], binary_targets: &[f64]) -> Result<IsotonicModel, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if scores.len() != binary_targets.len() {
        return Err(MetricsError::LengthMismatch {
            left: scores.len(),
            right: binary_targets.len(),
        });
    }
    check_binary_targets(binary_targets)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));

    // Pre-pool equal scores: (score, mean target, weight).
    let mut pooled: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &order {
        match pooled.last_mut() {
            Some((s, v, w)) if *s == scores[i] => {
                *v += (binary_targets[i] - *v) / (*w + 1.0);
                *w += 1.0;
            }
            _ => pooled.push((scores[i], binary_targets[i], 1.0)),
        }
    }

    // Weighted PAV over the pooled points.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new(); // (value, weight, span)
    for &(_, v, w) in &pooled {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let (v2, w2, n2) = blocks[blocks.len() - 1];
            let (v1, w1, n1) = blocks[blocks.len() - 2];
            if v1 > v2 {
                blocks.truncate(blocks.len() - 2);
                let w = w1 + w2;
                blocks.push(((v1 * w1 + v2 * w2) / w, w, n1 + n2));
            } else {
                break;
            }
        }
    }

    let breakpoints: Vec<f64> = pooled.iter().map(|&(s, _, _)| s).collect();
    let mut fitted = Vec::with_capacity(breakpoints.len());
    for &(v, _, span) in &blocks {
        fitted.extend(std::iter::repeat_n(v.clamp(0.0, 1.0), span));
    }
    debug_assert_eq!(fitted.len(), breakpoints.len());
    Ok(IsotonicModel { breakpoints, fitted })
}

impl IsotonicModel {
    /// Calibrated probability for a raw score (stepwise-constant with flat
    /// extension outside the fitted range).
    pub fn predict(&self, score: f64) -> f64 {
        // partition_point: number of breakpoints <= score.
        let k = self.breakpoints.partition_point(|&b| b <= score);
        if k == 0 {
            self.fitted[0]
        } else {
            self.fitted[k - 1]
        }
    }
}

/// Mean absolute error between the calibrator's predicted probabilities and
/// the binary targets over an evaluation set.
pub fn calibration_mae(
    model: &IsotonicModel,
    scores: &[f64],
    binary_targets: &[f64],
) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if scores.len() != binary_targets.len() {
        return Err(MetricsError::LengthMismatch {
            left: scores.len(),
            right: binary_targets.len(),
        });
    }
    check_binary_targets(binary_targets)?;
    let total: f64 =
        scores.iter().zip(binary_targets).map(|(&s, &t)| (model.predict(s) - t).abs()).sum();
    Ok(total / scores.len() as f64)
}

/// Sample variance (denominator N-1) of the residuals `score_i - label_i`.
/// Labels are numeric: pass ±1 or {0,1} to match how the scores were produced.
pub fn score_variance(labels_numeric: &[f64], raw_scores: &[f64]) -> Result<f64, MetricsError> {
    if labels_numeric.len() != raw_scores.len() {
        return Err(MetricsError::LengthMismatch {
            left: labels_numeric.len(),
            right: raw_scores.len(),
        });
    }
    let n = labels_numeric.len();
    if n < 2 {
        return Err(MetricsError::TooShort { need: 2, got: n });
    }
    let diffs: Vec<f64> = raw_scores.iter().zip(labels_numeric).map(|(s, l)| s - l).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    Ok(ss / (n - 1) as f64)
}

/// Convert ±1 labels to {0,1} targets for calibration work.
pub fn to_binary_targets(labels: &[i8]) -> Vec<f64> {
    labels.iter().map(|&t| if t > 0 { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn accuracy_basics() {
        assert_abs_diff_eq!(accuracy(&[1, -1, 1], &[1, -1, 1]).unwrap(), 1.0);
        assert_abs_diff_eq!(accuracy(&[1, -1, 1], &[-1, 1, -1]).unwrap(), 0.0);
        assert_abs_diff_eq!(accuracy(&[1, 1, -1, -1], &[1, 1, -1, 1]).unwrap(), 0.75);
        assert!(matches!(accuracy(&[], &[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn roc_auc_pair_example() {
        // Three of the four (pos, neg) pairs are correctly ordered.
        let curve = roc_auc(&[-1, -1, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap();
        assert_abs_diff_eq!(curve.auc, 0.75, epsilon = 1e-12);
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn roc_auc_all_ties_is_half() {
        let curve = roc_auc(&[1, -1, 1, -1], &[0.3, 0.3, 0.3, 0.3]).unwrap();
        assert_abs_diff_eq!(curve.auc, 0.5, epsilon = 1e-12);
        assert_eq!(curve.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn roc_auc_perfect_separation() {
        let curve = roc_auc(&[1, 1, -1, -1], &[2.0, 1.5, 0.5, 0.1]).unwrap();
        assert_abs_diff_eq!(curve.auc, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn roc_requires_both_classes() {
        assert!(matches!(roc_auc(&[1, 1], &[0.5, 0.2]), Err(MetricsError::SingleClass)));
    }

    #[test]
    fn isotonic_no_violators_is_identity() {
        let m = isotonic_fit(&[1.0, 2.0, 3.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.fitted, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn isotonic_single_pool() {
        let m = isotonic_fit(&[1.0, 2.0], &[1.0, 0.0]).unwrap();
        assert_eq!(m.fitted, vec![0.5, 0.5]);
    }

    #[test]
    fn isotonic_alternating_targets() {
        let m = isotonic_fit(&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.fitted, vec![0.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn isotonic_pools_tied_scores() {
        let m = isotonic_fit(&[1.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.breakpoints, vec![1.0, 2.0]);
        assert_eq!(m.fitted, vec![0.5, 1.0]);
    }

    #[test]
    fn isotonic_prediction_steps_and_extends_flat() {
        let m = isotonic_fit(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.predict(0.0), 0.0); // below range
        assert_abs_diff_eq!(m.predict(2.5), 0.0); // step holds until next breakpoint
        assert_abs_diff_eq!(m.predict(3.0), 1.0);
        assert_abs_diff_eq!(m.predict(10.0), 1.0); // above range
    }

    #[test]
    fn isotonic_rejects_nonbinary_targets() {
        assert!(matches!(
            isotonic_fit(&[1.0], &[0.25]),
            Err(MetricsError::BadTarget { index: 0, .. })
        ));
    }

    #[test]
    fn calibration_mae_examples() {
        let perfect = isotonic_fit(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(calibration_mae(&perfect, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        let constant = IsotonicModel { breakpoints: vec![0.0], fitted: vec![0.5] };
        assert_abs_diff_eq!(calibration_mae(&constant, &[0.2, 0.9], &[0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn score_variance_examples() {
        assert_abs_diff_eq!(score_variance(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), 0.0);
        // Residuals (1, -1): mean 0, sum of squares 2, variance 2/(2-1) = 2.
        assert_abs_diff_eq!(score_variance(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 2.0);
        assert!(matches!(
            score_variance(&[1.0], &[1.0]),
            Err(MetricsError::TooShort { need: 2, got: 1 })
        ));
    }
}
