//! Internal dense linear-algebra helpers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Condition-number guard for solver iterates.
pub(crate) const COND_LIMIT: f64 = 1e14;

/// Replaces `m` with its symmetric part `(m + m^T) / 2`.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Quadratic forms `x_i^T sigma^{-1} x_i` for every column of `x`, evaluated
/// through one triangular solve against the Cholesky factor of `sigma`.
pub(crate) fn quad_forms(chol: &Cholesky<f64, Dyn>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let z = chol
        .l_dirty()
        .solve_lower_triangular(x)
        .ok_or(Error::DegenerateIterate {
            cond: f64::INFINITY,
        })?;
    let mut q = Vec::with_capacity(x.ncols());
    for (i, col) in z.column_iter().enumerate() {
        let v = col.norm_squared();
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::NonFiniteWeight { index: i });
        }
        q.push(v);
    }
    Ok(q)
}

/// Rough `lambda_max / lambda_min` estimate from a few power and inverse-power
/// steps. Accurate to a small factor, which is all the 1e14 trip wire needs.
pub(crate) fn condition_estimate(sigma: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let p = sigma.nrows();
    let start = DVector::from_element(p, 1.0 / (p as f64).sqrt());

    let mut v = start.clone();
    let mut lambda_max = 0.0;
    for _ in 0..5 {
        let w = sigma * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        lambda_max = norm;
        v = w / norm;
    }

    let mut v = start;
    let mut inv_norm = 0.0;
    for _ in 0..5 {
        let w = chol.solve(&v);
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            return f64::INFINITY;
        }
        inv_norm = norm;
        v = w / norm;
    }

    lambda_max * inv_norm
}

/// Fails when the iterate's conditioning indicates a numerically singular fit.
pub(crate) fn guard_conditioning(sigma: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> Result<()> {
    let cond = condition_estimate(sigma, chol);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::DegenerateIterate { cond });
    }
    Ok(())
}
