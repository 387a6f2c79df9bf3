//! Robust estimation of sparse shape matrices from heavy-tailed elliptical
//! samples.
//!
//! The crate provides:
//!
//! - [`datagen`]: elliptical and contaminated dataset generation with
//!   deterministic, stream-addressed randomness;
//! - [`tme`]: Tyler's M-estimator via its trace-normalized fixed-point
//!   iteration, with implicit per-sample weights;
//! - [`regtme`]: the regularized variant (shrinkage toward the identity),
//!   a data statistic that prescribes the regularization level for a
//!   guaranteed linear convergence rate, and a subspace solve for `n < p`;
//! - [`threshold`]: entrywise hard thresholding and the sparse shape
//!   estimators built from the solvers and from the sample covariance;
//! - [`outlier`]: weight-based outlier screening and re-estimation;
//! - [`metrics`]: spectral-norm errors, the log-relative-error aggregate and
//!   sparsity diagnostics.

pub mod datagen;
pub mod error;
mod linalg;
pub mod metrics;
pub mod outlier;
pub mod regtme;
pub mod threshold;
pub mod tme;

pub use datagen::{
    ar_shape, contaminate, haar_orthogonal, outlier_shape, pair_differences, sample_elliptical,
    ContaminationSpec, DataSet, EllipticalModel, OutlierDiagSpec, ScaleLaw, ShapeMatrix, StreamKey,
    StreamRole, XiMode,
};
pub use error::{Error, Result};
pub use metrics::{lre, relative_spectral_error, sparsity_stats, spectral_norm, SparsityStats};
pub use outlier::{estimate_inlier_stats, kde, screen_and_reestimate, KdeCurve, ScreeningReport};
pub use regtme::{
    c_of_x, cx_theoretical_bound, recommend_alpha, reg_tyler, reg_tyler_traced, reg_weights,
    ConvergenceTrace, RegConfig, RegSolution, SolverPath,
};
pub use threshold::{
    estimate_shape_regtme, estimate_shape_tme, hard_threshold, regtme_shape, resolve_threshold,
    scaled_sample_cov, thresholded_sample_cov, ThresholdSchedule,
};
pub use tme::{tme_weights, tyler_fixed_point, TmeSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
