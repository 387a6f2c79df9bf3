//! Weight-based outlier screening.
//!
//! For clean elliptical data the implicit weights of the regularized
//! estimator concentrate around a single value, so outliers betray
//! themselves by weights far from the bulk. The screen estimates the inlier
//! weight location and spread from a kernel density estimate of all weights
//! (mode, plus the width of the level set at a fixed fraction of the modal
//! density), keeps the samples within two estimated standard deviations of
//! the mode, and re-estimates on the survivors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datagen::{DataSet, GenMeta};
use crate::error::{Error, Result};
use crate::regtme::{reg_tyler, reg_weights, RegConfig};
use crate::threshold::{hard_threshold, regtme_shape, resolve_threshold, ThresholdSchedule};

/// Density-level ratio used to read off the inlier spread; the benchmark
/// value is 0.7.
pub const DEFAULT_LEVEL_RATIO: f64 = 0.7;

/// Number of abscissae in the density grid.
const GRID_POINTS: usize = 512;

/// Gaussian kernel density estimate on a fixed grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Everything the screen decided, serializable for inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreeningReport {
    /// Weights of all samples, computed on unit-normalized data.
    pub weights: Vec<f64>,
    /// Density abscissae and values.
    pub density_grid: (Vec<f64>, Vec<f64>),
    /// Estimated inlier weight (density mode).
    pub w_in: f64,
    /// Estimated inlier weight spread.
    pub sigma_in: f64,
    /// Indices kept for re-estimation, sorted.
    pub kept: Vec<usize>,
    /// Acceptance interval `w_in ± 2 sigma_in`.
    pub bounds: (f64, f64),
    /// Generation record of the screened dataset, when present.
    pub meta: Option<GenMeta>,
}

fn quantile(sorted: &[f64], f: f64) -> f64 {
    // Linear interpolation between order statistics (the common "type 7").
    let n = sorted.len();
    let h = f * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian-kernel density with Silverman's bandwidth
/// `h = 0.9 min(std, iqr / 1.34) n^{-1/5}` on a 512-point grid spanning
/// `[min - 3h, max + 3h]`. Rejects fewer than two values or all-equal input.
pub fn kde(values: &[f64]) -> Result<KdeCurve> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateDensity("need at least two values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDensity("non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (min, max) = (sorted[0], sorted[n - 1]);
    if min == max {
        return Err(Error::DegenerateDensity("all values identical".into()));
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h.is_nan() || h <= 0.0 {
        return Err(Error::DegenerateDensity("zero bandwidth".into()));
    }

    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut grid = Vec::with_capacity(GRID_POINTS);
    let mut density = Vec::with_capacity(GRID_POINTS);
    for k in 0..GRID_POINTS {
        let x = lo + step * k as f64;
        let mut acc = 0.0;
        for v in values {
            let z = (x - v) / h;
            acc += (-0.5 * z * z).exp();
        }
        grid.push(x);
        density.push(acc * norm);
    }
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Reads the inlier statistics off a density curve: the mode `w_in`, and the
/// spread implied by the widest contiguous interval around the mode where
/// the density stays above `r` times the modal value. For a Gaussian bulk
/// that interval has half-width `sigma * sqrt(-2 ln r)`.
pub fn inlier_stats_from_curve(curve: &KdeCurve, r: f64) -> Result<(f64, f64)> {
    let r_valid = r > 0.0 && r < 1.0;
    if !r_valid {
        return Err(Error::InvalidArgument(format!(
            "level ratio r = {r} outside (0, 1)"
        )));
    }
    if curve.grid.len() != curve.density.len() || curve.grid.len() < 3 {
        return Err(Error::DegenerateDensity("malformed density curve".into()));
    }
    let mut mode_idx = 0;
    for (i, d) in curve.density.iter().enumerate() {
        if *d > curve.density[mode_idx] {
            mode_idx = i;
        }
    }
    let w_in = curve.grid[mode_idx];
    let level = r * curve.density[mode_idx];

    let mut left = mode_idx;
    while left > 0 && curve.density[left - 1] >= level {
        left -= 1;
    }
    let mut right = mode_idx;
    while right + 1 < curve.density.len() && curve.density[right + 1] >= level {
        right += 1;
    }
    let half_width = 0.5 * (curve.grid[right] - curve.grid[left]);
    let sigma_in = half_width / (-2.0 * r.ln()).sqrt();
    Ok((w_in, sigma_in))
}

/// Kernel density estimate of the weights followed by
/// [`inlier_stats_from_curve`].
pub fn estimate_inlier_stats(weights: &[f64], r: f64) -> Result<(f64, f64)> {
    let curve = kde(weights)?;
    inlier_stats_from_curve(&curve, r)
}

/// Minimum number of survivors for the re-estimation to stay well posed.
fn min_kept(p: usize, alpha: f64) -> usize {
    ((p as f64 / (1.0 + alpha) + 1.0).ceil() as usize).max(10)
}

/// Full screening pipeline. Weights are computed on unit-normalized samples
/// (the estimator itself is scale invariant, so normalization only
/// standardizes the weight scale); samples whose weight leaves
/// `w_in ± 2 sigma_in` are dropped; the regularized solve and the
/// threshold estimator run again on the survivors.
///
/// Returns the report and the re-estimated thresholded shape.
pub fn screen_and_reestimate(
    data: &DataSet,
    config: &RegConfig,
    schedule: &ThresholdSchedule,
    r: f64,
) -> Result<(ScreeningReport, DMatrix<f64>)> {
    let mut normalized = data.samples().clone();
    for mut col in normalized.column_iter_mut() {
        let norm = col.norm();
        col.scale_mut(1.0 / norm);
    }
    let normalized = DataSet::from_columns(normalized)?;

    let solution = reg_tyler(&normalized, config)?;
    let weights = reg_weights(&solution, &normalized)?;

    let curve = kde(&weights)?;
    let (w_in, sigma_in) = inlier_stats_from_curve(&curve, r)?;
    let bounds = (w_in - 2.0 * sigma_in, w_in + 2.0 * sigma_in);

    let kept: Vec<usize> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w >= bounds.0 && **w <= bounds.1)
        .map(|(i, _)| i)
        .collect();

    let needed = min_kept(data.p(), config.alpha);
    if kept.len() < needed {
        return Err(Error::ScreeningFailed {
            kept: kept.len(),
            needed,
        });
    }

    // Re-estimate on the kept original samples; per-sample scale does not
    // affect the solution, so un-normalized columns are fine here.
    let survivors = data.subset(&kept)?;
    let refit = reg_tyler(&survivors, config)?;
    let shape = regtme_shape(&refit)?;
    let t = resolve_threshold(survivors.p(), survivors.n(), schedule);
    let estimate = hard_threshold(&shape, t);

    let report = ScreeningReport {
        weights,
        density_grid: (curve.grid, curve.density),
        w_in,
        sigma_in,
        kept,
        bounds,
        meta: data.meta().cloned(),
    };
    Ok((report, estimate))
}
