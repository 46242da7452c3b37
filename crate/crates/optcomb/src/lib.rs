//! Optimal linear combinations of binary classifiers.
//!
//! The library has three layers:
//!
//! * numerical engines: a dense two-phase primal simplex LP solver and a
//!   Euclidean simplex projection ([`lp`]);
//! * the experiment stack: dataset ingestion and resampling plans
//!   ([`dataset`]), an SMO-trained RBF-kernel SVM plus k-NN ([`svm`],
//!   [`knn`]), a grid runner producing out-of-sample score matrices
//!   ([`grid`]), the hinge-slack weight solvers that combine those scores
//!   ([`combine`]), and evaluation metrics with isotonic calibration
//!   ([`metrics`]);
//! * a bias-variance laboratory for 0-1 loss ([`biasvar`]) that verifies the
//!   decomposition identities analytically and by Monte Carlo, including the
//!   1-nearest-neighbor error law.
//!
//! All randomized procedures take explicit 64-bit seeds and are deterministic
//! given their inputs.

// Validation guards use `!(x > 0.0)` on purpose: unlike `x <= 0.0`, the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The numeric kernels index several arrays in lockstep (or two rows of one
// matrix); explicit indices keep that pairing visible.
#![allow(clippy::needless_range_loop)]

pub mod biasvar;
pub mod combine;
pub mod dataset;
pub mod grid;
pub mod knn;
pub mod lp;
pub mod matrix;
pub mod metrics;
pub mod svm;

pub use matrix::Matrix;
