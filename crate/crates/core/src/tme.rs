//! Tyler's M-estimator via the trace-normalized fixed-point iteration.
//!
//! The estimator is the trace-p matrix satisfying
//! `(p/n) sum_i x_i x_i^T / (x_i^T S^{-1} x_i) = S`. Starting from the
//! identity, each step forms the weighted scatter sum, rescales it to trace
//! `p`, and stops once consecutive iterates differ by less than `tol` in
//! Frobenius norm.

use nalgebra::{Cholesky, DMatrix};

use crate::datagen::{DataSet, ShapeMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Stopping threshold used by the benchmark experiments.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration cap used by the benchmark experiments.
pub const DEFAULT_MAX_ITER: usize = 1400;

/// Converged Tyler fixed point plus per-sample weights and diagnostics.
#[derive(Debug, Clone)]
pub struct TmeSolution {
    /// Trace-p fixed point.
    pub estimate: ShapeMatrix,
    /// Implicit weights of the unit-normalized samples, summing to one: with
    /// `z_i = x_i / |x_i|` the estimate equals the weighted scatter
    /// `p * sum w_i z_i z_i^T / tr(sum w_i z_i z_i^T)`. Anchoring the weights
    /// to the sphere makes them invariant to per-sample scaling, like the
    /// estimator itself, and frees them from the scale fluctuations of
    /// `|x_i|^2`.
    pub weights: Vec<f64>,
    /// Fixed-point updates performed.
    pub iterations: usize,
    /// Frobenius distance between the last two iterates.
    pub final_step: f64,
    /// Relative Frobenius residual of the fixed-point equation, with the
    /// weighted scatter side renormalized to trace p.
    pub residual: f64,
    pub converged: bool,
}

/// Weighted scatter `sum_i x_i x_i^T / q_i`, built column-scaled so one
/// matrix product does the accumulation; symmetrized to kill rounding skew.
fn weighted_scatter(x: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (j, qj) in q.iter().enumerate() {
        let inv = 1.0 / qj;
        scaled.column_mut(j).scale_mut(inv);
    }
    let mut m = scaled * x.transpose();
    linalg::symmetrize(&mut m);
    m
}

/// Weights proportional to `1 / (z_i^T S^{-1} z_i)` for the unit-normalized
/// samples `z_i`, rescaled to sum to one. `q` holds the quadratic forms of
/// the raw samples; dividing by `|x_i|^2` converts them to the sphere.
fn sphere_weights(q: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    let scaled: Vec<f64> = q
        .iter()
        .zip(x.column_iter())
        .map(|(qi, col)| qi / col.norm_squared())
        .collect();
    let total: f64 = scaled.iter().map(|v| 1.0 / v).sum();
    scaled.iter().map(|v| (1.0 / v) / total).collect()
}

/// Runs the fixed-point iteration from the identity. Fails when `n <= p`
/// (the estimator does not exist) or when an iterate becomes numerically
/// singular.
pub fn tyler_fixed_point(data: &DataSet, tol: f64, max_iter: usize) -> Result<TmeSolution> {
    let (p, n) = (data.p(), data.n());
    if n <= p {
        return Err(Error::Existence { p, n });
    }
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(Error::InvalidArgument(
            "tol must be positive and max_iter nonzero".into(),
        ));
    }
    let x = data.samples();

    let mut sigma = DMatrix::<f64>::identity(p, p);
    let mut iterations = 0usize;
    let mut final_step = f64::INFINITY;
    let mut converged = false;
    let mut q = vec![1.0; n];

    while iterations < max_iter {
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::DegenerateIterate {
            cond: f64::INFINITY,
        })?;
        linalg::guard_conditioning(&sigma, &chol)?;
        q = linalg::quad_forms(&chol, x)?;
        let m = weighted_scatter(x, &q);
        let next = &m * (p as f64 / m.trace());
        final_step = (&next - &sigma).norm();
        sigma = next;
        iterations += 1;
        if final_step < tol {
            converged = true;
            break;
        }
    }

    // Diagnostics at the final iterate: weights and the fixed-point residual.
    let chol = Cholesky::new(sigma.clone()).ok_or(Error::DegenerateIterate {
        cond: f64::INFINITY,
    })?;
    q = linalg::quad_forms(&chol, x)?;
    let weights = sphere_weights(&q, x);
    let m = weighted_scatter(x, &q);
    let lhs = &m * (p as f64 / m.trace());
    let residual = (&lhs - &sigma).norm() / sigma.norm();

    Ok(TmeSolution {
        estimate: ShapeMatrix::new(sigma)?,
        weights,
        iterations,
        final_step,
        residual,
        converged,
    })
}

/// Implicit per-sample weights of a converged solution:
/// `w_i` proportional to `1 / (x_i^T S^{-1} x_i)`, normalized to sum to one.
pub fn tme_weights(solution: &TmeSolution, data: &DataSet) -> Result<Vec<f64>> {
    if !solution.converged {
        return Err(Error::NotConverged);
    }
    if solution.estimate.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            left: solution.estimate.dim(),
            right: data.p(),
        });
    }
    let chol =
        Cholesky::new(solution.estimate.matrix().clone()).ok_or(Error::DegenerateIterate {
            cond: f64::INFINITY,
        })?;
    let q = linalg::quad_forms(&chol, data.samples())?;
    Ok(sphere_weights(&q, data.samples()))
}

/// e1, e2 and the two diagonal unit vectors: symmetry forces the identity.
#[cfg(test)]
pub(crate) fn four_point_dataset() -> DataSet {
    use nalgebra::DVector;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let cols = DMatrix::from_columns(&[
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![s, s]),
        DVector::from_vec(vec![s, -s]),
    ]);
    DataSet::from_columns(cols).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn symmetric_four_points_give_identity() {
        let sol = tyler_fixed_point(&four_point_dataset(), 1e-12, 100).unwrap();
        assert!(sol.converged);
        let id = DMatrix::identity(2, 2);
        assert!(crate::linalg::max_abs_diff(sol.estimate.matrix(), &id) < 1e-12);
        for w in &sol.weights {
            assert_relative_eq!(*w, 0.25, epsilon = 1e-12);
        }
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn dimension_one_normalizes_to_unit() {
        let cols = DMatrix::from_row_slice(1, 3, &[2.0, -5.0, 0.25]);
        let data = DataSet::from_columns(cols).unwrap();
        let sol = tyler_fixed_point(&data, 1e-12, 50).unwrap();
        assert_relative_eq!(sol.estimate.matrix()[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn collinear_samples_trip_the_degeneracy_guard() {
        // Every sample on one line: the weighted scatter collapses to rank
        // one and the iterate cannot stay invertible.
        let cols =
            DMatrix::from_row_slice(2, 5, &[1.0, -2.0, 0.5, 3.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let data = DataSet::from_columns(cols).unwrap();
        assert!(matches!(
            tyler_fixed_point(&data, 1e-12, 200),
            Err(Error::DegenerateIterate { .. })
        ));
    }

    #[test]
    fn existence_requires_more_samples_than_dimensions() {
        let cols = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ]);
        let data = DataSet::from_columns(cols).unwrap();
        assert!(matches!(
            tyler_fixed_point(&data, 1e-12, 50),
            Err(Error::Existence { p: 2, n: 2 })
        ));
    }

    #[test]
    fn per_sample_scaling_leaves_estimate_unchanged() {
        use crate::datagen::{
            ar_shape, sample_elliptical, EllipticalModel, ScaleLaw, StreamKey, XiMode,
        };
        let model = EllipticalModel::centered(
            ar_shape(4, 0.6).unwrap(),
            XiMode::StandardGaussian,
            ScaleLaw::Constant,
        );
        let data = sample_elliptical(&model, 40, StreamKey::new(5, 0)).unwrap();
        let mut scaled = data.samples().clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(0.1 + j as f64);
        }
        let scaled = DataSet::from_columns(scaled).unwrap();
        let a = tyler_fixed_point(&data, 1e-13, 500).unwrap();
        let b = tyler_fixed_point(&scaled, 1e-13, 500).unwrap();
        assert!(crate::linalg::max_abs_diff(a.estimate.matrix(), b.estimate.matrix()) < 1e-10);
    }

    #[test]
    fn weights_require_convergence() {
        let data = four_point_dataset();
        let mut sol = tyler_fixed_point(&data, 1e-12, 100).unwrap();
        sol.converged = false;
        assert!(matches!(tme_weights(&sol, &data), Err(Error::NotConverged)));
    }

    #[test]
    fn weights_sum_to_one() {
        use crate::datagen::{
            ar_shape, sample_elliptical, EllipticalModel, ScaleLaw, StreamKey, XiMode,
        };
        let model = EllipticalModel::centered(
            ar_shape(6, 0.7).unwrap(),
            XiMode::StandardGaussian,
            ScaleLaw::Laplace,
        );
        let data = sample_elliptical(&model, 60, StreamKey::new(21, 3)).unwrap();
        let sol = tyler_fixed_point(&data, 1e-12, 800).unwrap();
        assert!(sol.converged);
        let total: f64 = sol.weights.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        let again = tme_weights(&sol, &data).unwrap();
        for (a, b) in sol.weights.iter().zip(again.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }
}
