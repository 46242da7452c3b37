//! Per-point bias-variance decomposition of 0-1 loss, analytically and by
//! Monte Carlo, including the dependent-prediction case (optimism) and the
//! one-nearest-neighbor error law 2·BE − 2·BE².
//!
//! A "world" is a single feature point x with true conditional
//! p = P(t = +1 | x) and a prediction channel: either independent of the
//! realized label (y ~ Bernoulli(q)) or coupled to it through a conditional
//! table P(y = +1 | t). Conventions (documented tie-breaks): the Bayes label
//! y* is +1 iff p ≥ 0.5, and the majority prediction y^m is +1 iff q ≥ 0.5.

use crate::knn::knn_predict;
use crate::Matrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BvError {
    #[error("{name} must lie in [0, 1], got {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("operation requires the {expected} channel")]
    WrongChannel { expected: &'static str },
    #[error("Bayes error must lie in [0, 0.5], got {value}")]
    BadBayesError { value: f64 },
}

/// Prediction channel at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// y ~ Bernoulli(q), independent of the realized label.
    Independent { q: f64 },
    /// y coupled to the realized label: P(y = +1 | t = ±1).
    Coupled { p_pos_given_pos: f64, p_pos_given_neg: f64 },
}

/// A single evaluation point: true conditional plus prediction channel.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PointWorld {
    pub p_true: f64,
    pub channel: Channel,
}

fn check_prob(name: &'static str, value: f64) -> Result<f64, BvError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(BvError::BadProbability { name, value })
    }
}

impl PointWorld {
    pub fn independent(p_true: f64, q: f64) -> Result<Self, BvError> {
        Ok(PointWorld {
            p_true: check_prob("p_true", p_true)?,
            channel: Channel::Independent { q: check_prob("q", q)? },
        })
    }

    pub fn coupled(
        p_true: f64,
        p_pos_given_pos: f64,
        p_pos_given_neg: f64,
    ) -> Result<Self, BvError> {
        Ok(PointWorld {
            p_true: check_prob("p_true", p_true)?,
            channel: Channel::Coupled {
                p_pos_given_pos: check_prob("P(y=+1|t=+1)", p_pos_given_pos)?,
                p_pos_given_neg: check_prob("P(y=+1|t=-1)", p_pos_given_neg)?,
            },
        })
    }

    /// The 1NN channel: the prediction equals the realized label.
    pub fn one_nn(p_true: f64) -> Result<Self, BvError> {
        Self::coupled(p_true, 1.0, 0.0)
    }

    /// Marginal P(y = +1).
    pub fn q_marginal(&self) -> f64 {
        match self.channel {
            Channel::Independent { q } => q,
            Channel::Coupled { p_pos_given_pos, p_pos_given_neg } => {
                p_pos_given_pos * self.p_true + p_pos_given_neg * (1.0 - self.p_true)
            }
        }
    }
}

/// Monte-Carlo estimates with binomial standard errors.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimates {
    pub trials: u64,
    pub seed: u64,
    pub bayes_error: f64,
    pub variance: f64,
    pub loss: f64,
    pub loss_se: f64,
}

/// Decomposition components at a point; analytic parts always present,
/// dependent-channel and Monte-Carlo parts where applicable.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BvReport {
    pub p_true: f64,
    pub bayes_label: i8,
    pub bayes_error: f64,
    pub majority_label: i8,
    pub bias: u8,
    pub variance: f64,
    /// Expected 0-1 loss when the prediction is independent of the evaluated
    /// label (the four-term decomposition value).
    pub expected_loss_ind: f64,
    /// Expected 0-1 loss for a coupled channel.
    pub expected_loss_dep: Option<f64>,
    /// Gap ind − dep caused by prediction/label dependence.
    pub optimism: Option<f64>,
    pub mc: Option<McEstimates>,
}

fn bayes_label(p: f64) -> i8 {
    if p >= 0.5 {
        1
    } else {
        -1
    }
}

/// The four-term decomposition:
/// BE + bias·(1−2BE) + var·(1−2BE) − 2·var·bias·(1−2BE).
fn four_term(be: f64, bias: u8, var: f64) -> f64 {
    let b = f64::from(bias);
    be + b * (1.0 - 2.0 * be) + var * (1.0 - 2.0 * be) - 2.0 * var * b * (1.0 - 2.0 * be)
}

fn base_report(world: &PointWorld) -> BvReport {
    let p = world.p_true;
    let q = world.q_marginal();
    let y_star = bayes_label(p);
    let y_m = bayes_label(q);
    let be = p.min(1.0 - p);
    let var = q.min(1.0 - q);
    let bias = u8::from(y_m != y_star);
    let loss_ind = four_term(be, bias, var);
    // Direct misclassification probability of an independent Bernoulli(q)
    // prediction: P(y ≠ t) = q·(1−p) + (1−q)·p. The decomposition must agree
    // to machine precision.
    let direct = q * (1.0 - p) + (1.0 - q) * p;
    assert!(
        (loss_ind - direct).abs() <= 1e-12,
        "decomposition identity violated: {loss_ind} vs direct {direct}"
    );
    BvReport {
        p_true: p,
        bayes_label: y_star,
        bayes_error: be,
        majority_label: y_m,
        bias,
        variance: var,
        expected_loss_ind: loss_ind,
        expected_loss_dep: None,
        optimism: None,
        mc: None,
    }
}

/// Analytic decomposition for an independent-channel world.
pub fn analytic_decomposition(world: &PointWorld) -> Result<BvReport, BvError> {
    match world.channel {
        Channel::Independent { .. } => Ok(base_report(world)),
        Channel::Coupled { .. } => Err(BvError::WrongChannel { expected: "independent" }),
    }
}

/// Analytic decomposition for a coupled-channel world: dependent-case loss
/// BE − 2·BE·P(y≠y* | t≠y*) + P(y≠y*), optimism
/// 2·BE·(P(y≠y* | t≠y*) − P(y≠y*)), and the exact identity
/// ind − dep = optimism.
pub fn dependent_decomposition(world: &PointWorld) -> Result<BvReport, BvError> {
    let Channel::Coupled { p_pos_given_pos: a, p_pos_given_neg: b } = world.channel else {
        return Err(BvError::WrongChannel { expected: "coupled" });
    };
    let mut report = base_report(world);
    let p = world.p_true;
    let be = report.bayes_error;

    // P(y ≠ y*) marginally, and conditioned on the label being the minority
    // class (t ≠ y*).
    let (p_flip, p_flip_given_minority) = if report.bayes_label == 1 {
        (p * (1.0 - a) + (1.0 - p) * (1.0 - b), 1.0 - b)
    } else {
        (p * a + (1.0 - p) * b, a)
    };
    let dep = be - 2.0 * be * p_flip_given_minority + p_flip;
    let optimism = 2.0 * be * (p_flip_given_minority - p_flip);
    assert!(
        (report.expected_loss_ind - dep - optimism).abs() <= 1e-12,
        "optimism identity violated: ind {} dep {dep} optimism {optimism}",
        report.expected_loss_ind
    );
    report.expected_loss_dep = Some(dep);
    report.optimism = Some(optimism);
    Ok(report)
}

/// Simulate (t, y) pairs and estimate the components by frequencies. The loss
/// estimate is the channel's own loss: independent worlds estimate the
/// independent-case loss, coupled worlds the dependent-case loss.
pub fn monte_carlo_decomposition(
    world: &PointWorld,
    trials: u64,
    seed: u64,
) -> Result<BvReport, BvError> {
    assert!(trials >= 1, "need at least one trial");
    let mut report = match world.channel {
        Channel::Independent { .. } => analytic_decomposition(world)?,
        Channel::Coupled { .. } => dependent_decomposition(world)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = world.p_true;
    let (mut n_loss, mut n_var, mut n_be) = (0u64, 0u64, 0u64);
    for _ in 0..trials {
        let t: i8 = if rng.gen::<f64>() < p { 1 } else { -1 };
        let q_y = match world.channel {
            Channel::Independent { q } => q,
            Channel::Coupled { p_pos_given_pos, p_pos_given_neg } => {
                if t == 1 {
                    p_pos_given_pos
                } else {
                    p_pos_given_neg
                }
            }
        };
        let y: i8 = if rng.gen::<f64>() < q_y { 1 } else { -1 };
        n_loss += u64::from(y != t);
        n_var += u64::from(y != report.majority_label);
        n_be += u64::from(t != report.bayes_label);
    }
    let freq = |n: u64| n as f64 / trials as f64;
    let loss = freq(n_loss);
    report.mc = Some(McEstimates {
        trials,
        seed,
        bayes_error: freq(n_be),
        variance: freq(n_var),
        loss,
        loss_se: (loss * (1.0 - loss) / trials as f64).sqrt(),
    });
    Ok(report)
}

/// The 1NN asymptotic test-error curve (be, 2·be − 2·be²) over a grid of
/// Bayes-error values. The curve never exceeds 2·be and meets be at 0.5.
pub fn one_nn_curve(be_grid: &[f64]) -> Result<Vec<(f64, f64)>, BvError> {
    let curve: Result<Vec<_>, BvError> = be_grid
        .iter()
        .map(|&be| {
            if !(0.0..=0.5).contains(&be) {
                return Err(BvError::BadBayesError { value: be });
            }
            let err = 2.0 * be - 2.0 * be * be;
            assert!(err <= 2.0 * be + 1e-15, "curve exceeded twice the Bayes error");
            Ok((be, err))
        })
        .collect();
    let curve = curve?;
    if let Some(&(be, err)) = curve.iter().find(|&&(be, _)| be == 0.5) {
        assert!((err - be).abs() <= 1e-15, "curve must meet BE at 0.5");
    }
    Ok(curve)
}

/// Result of the empirical 1NN probe.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OneNnCheck {
    pub p_true: f64,
    pub trials: u64,
    pub seed: u64,
    /// Fraction of trials where the trained 1NN mislabels its own training
    /// point (must be 0: the nearest neighbor of a seen point is itself).
    pub training_error: f64,
    pub test_error: f64,
    pub expected_test_error: f64,
    pub test_error_se: f64,
}

/// Train an actual 1NN classifier per trial on a tiny synthetic 1-D dataset
/// whose probe-point label is Bernoulli(p_true), then measure training error
/// at the probe point and test error against an independent relabeling.
pub fn empirical_1nn_check(p_true: f64, trials: u64, seed: u64) -> Result<OneNnCheck, BvError> {
    check_prob("p_true", p_true)?;
    assert!(trials >= 1, "need at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_x = Matrix::from_rows(&[vec![0.0], vec![-1.0], vec![1.0]]);
    let (mut n_train_err, mut n_test_err) = (0u64, 0u64);
    for _ in 0..trials {
        let draw = |rng: &mut ChaCha8Rng| -> i8 {
            if rng.gen::<f64>() < p_true {
                1
            } else {
                -1
            }
        };
        // Labels at the probe (x=0) and two decoy points.
        let labels = vec![draw(&mut rng), draw(&mut rng), draw(&mut rng)];
        let y = knn_predict(&train_x, &labels, &[0.0], 1).expect("valid k");
        n_train_err += u64::from(y != labels[0]);
        let t_test = draw(&mut rng);
        n_test_err += u64::from(y != t_test);
    }
    let be = p_true.min(1.0 - p_true);
    let test_error = n_test_err as f64 / trials as f64;
    Ok(OneNnCheck {
        p_true,
        trials,
        seed,
        training_error: n_train_err as f64 / trials as f64,
        test_error,
        expected_test_error: 2.0 * be - 2.0 * be * be,
        test_error_se: (test_error * (1.0 - test_error) / trials as f64).sqrt(),
    })
}
