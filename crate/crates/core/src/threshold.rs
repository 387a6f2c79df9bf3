//! Entrywise hard thresholding and the sparse shape estimators built from
//! Tyler's M-estimator, its regularized variant, and the scaled sample
//! covariance baselines.

use nalgebra::DMatrix;

use crate::datagen::{DataSet, ShapeMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::regtme::{reg_tyler, RegConfig, RegSolution};
use crate::tme::tyler_fixed_point;

/// Threshold level selection: `t = multiplier * sqrt(ln p / n)` unless an
/// explicit level overrides it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    pub multiplier: f64,
    pub explicit_t: Option<f64>,
}

impl Default for ThresholdSchedule {
    fn default() -> Self {
        Self {
            multiplier: 1.0,
            explicit_t: None,
        }
    }
}

impl ThresholdSchedule {
    pub fn with_multiplier(multiplier: f64) -> Self {
        Self {
            multiplier,
            explicit_t: None,
        }
    }

    pub fn explicit(t: f64) -> Self {
        Self {
            multiplier: 1.0,
            explicit_t: Some(t),
        }
    }
}

/// Zeroes every entry with `|a_ij| <= t`; strictly larger entries survive.
pub fn hard_threshold(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    a.map(|v| if v.abs() > t { v } else { 0.0 })
}

/// Resolved threshold level for a `p x n` problem (natural logarithm).
pub fn resolve_threshold(p: usize, n: usize, schedule: &ThresholdSchedule) -> f64 {
    debug_assert!(p >= 2 && n >= 1);
    match schedule.explicit_t {
        Some(t) => t,
        None => schedule.multiplier * ((p as f64).ln() / n as f64).sqrt(),
    }
}

/// Thresholded Tyler estimator for `n > p`: run the fixed-point solve (its
/// output is already trace-p) and hard-threshold it. The result is symmetric
/// but not necessarily positive semidefinite.
pub fn estimate_shape_tme(
    data: &DataSet,
    tol: f64,
    max_iter: usize,
    schedule: &ThresholdSchedule,
) -> Result<DMatrix<f64>> {
    let sol = tyler_fixed_point(data, tol, max_iter)?;
    let t = resolve_threshold(data.p(), data.n(), schedule);
    Ok(hard_threshold(sol.estimate.matrix(), t))
}

/// Trace-p shape estimate extracted from a regularized solution: remove the
/// identity part `a/(1+a) I` and rescale the remainder to trace `p`.
pub fn regtme_shape(solution: &RegSolution) -> Result<DMatrix<f64>> {
    let p = solution.sigma.nrows();
    let c = solution.identity_weight();
    let mut centered = solution.sigma.clone();
    for i in 0..p {
        centered[(i, i)] -= c;
    }
    let trace = centered.trace();
    if trace <= 1e-14 * p as f64 {
        return Err(Error::AllIdentity);
    }
    Ok(centered * (p as f64 / trace))
}

/// Thresholded regularized estimator: solve, strip the identity part,
/// rescale to trace `p`, hard-threshold.
pub fn estimate_shape_regtme(
    data: &DataSet,
    config: &RegConfig,
    schedule: &ThresholdSchedule,
) -> Result<DMatrix<f64>> {
    let sol = reg_tyler(data, config)?;
    let shape = regtme_shape(&sol)?;
    let t = resolve_threshold(data.p(), data.n(), schedule);
    Ok(hard_threshold(&shape, t))
}

/// Sample covariance `(1/n) sum x_i x_i^T` scaled to trace `p`.
pub fn scaled_sample_cov(data: &DataSet) -> Result<ShapeMatrix> {
    let (p, n) = (data.p(), data.n());
    let mut s = data.samples() * data.samples().transpose() / n as f64;
    linalg::symmetrize(&mut s);
    let trace = s.trace();
    if trace <= 0.0 {
        return Err(Error::InvalidArgument(
            "sample covariance has zero trace".into(),
        ));
    }
    s *= p as f64 / trace;
    ShapeMatrix::new(s)
}

/// Hard-thresholded scaled sample covariance.
pub fn thresholded_sample_cov(
    data: &DataSet,
    schedule: &ThresholdSchedule,
) -> Result<DMatrix<f64>> {
    let cov = scaled_sample_cov(data)?;
    let t = resolve_threshold(data.p(), data.n(), schedule);
    Ok(hard_threshold(cov.matrix(), t))
}
