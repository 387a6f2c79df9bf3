//! Regularized Tyler's M-estimator: the fixed point of
//! `S = (1/(1+a)) (p/n) sum_i x_i x_i^T / (x_i^T S^{-1} x_i) + (a/(1+a)) I`,
//! together with the data statistic `C(X)` that controls the regularization
//! level required for a guaranteed linear convergence rate, and a subspace
//! solve for the `n < p` regime.
//!
//! The iteration starts from `S_1 = (a/(1+a)) I`, the start for which the
//! linear-rate guarantee holds, and stops on the scale-free rule used by the
//! benchmark experiments: the Frobenius distance between consecutive
//! trace-p-normalized iterates drops below `tol`. In the guaranteed regime
//! (`a` above the existence bound) convergence additionally requires the raw
//! relative step to fall below `tol`, because on radially symmetric data the
//! normalized iterates can coincide while the raw iterates are still moving
//! toward the fixed point. Below the existence bound the raw iterates need
//! not converge at all, so a forced solve keeps the scale-free rule only.

use nalgebra::{Cholesky, DMatrix, SVD};

use crate::datagen::DataSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::spectral_norm;
pub use crate::tme::{DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Floor applied by `recommend_alpha` so the returned level is positive even
/// when the rate bound is not binding.
const ALPHA_FLOOR: f64 = 1e-6;

/// Which linear-algebra route the solver takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Iterate on full `p x p` matrices regardless of the sample count.
    Dense,
    /// For `n < p`, solve inside the sample subspace (dimension at most `n`)
    /// and embed back; identical result, much cheaper per iteration.
    SubspaceAuto,
}

/// Solve-time configuration for the regularized estimator.
#[derive(Debug, Clone, Copy)]
pub struct RegConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub path: SolverPath,
    /// Run even when `alpha` is at or below the existence bound
    /// `max(0, p/n - 1)`. The scale-normalized iteration still converges in
    /// practice; such solutions are flagged as not guaranteed.
    pub force: bool,
}

impl RegConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            path: SolverPath::SubspaceAuto,
            force: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_path(mut self, path: SolverPath) -> Self {
        self.path = path;
        self
    }

    pub fn forced(mut self) -> Self {
        self.force = true;
        self
    }
}

/// Solution of the regularized fixed-point equation.
#[derive(Debug, Clone)]
pub struct RegSolution {
    /// The fixed-point matrix itself. Unlike the unregularized estimator it
    /// is not trace normalized; instead `tr(sigma^{-1}) = p` at convergence.
    pub sigma: DMatrix<f64>,
    /// Unnormalized weights `w_i = 1 / (x_i^T sigma^{-1} x_i)`.
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub iterations: usize,
    /// Last value of the scale-free stopping metric.
    pub final_step: f64,
    /// Relative Frobenius residual of the fixed-point equation.
    pub residual: f64,
    pub converged: bool,
    /// Whether `alpha` was above the existence bound (no forcing involved).
    pub guaranteed: bool,
}

impl RegSolution {
    /// Identity weight of the convex combination, `alpha / (1 + alpha)`.
    pub fn identity_weight(&self) -> f64 {
        self.alpha / (1.0 + self.alpha)
    }

    /// Trace of the inverse solution; equals `p` at the exact fixed point
    /// regardless of `alpha`.
    pub fn inverse_trace(&self) -> Result<f64> {
        let chol = Cholesky::new(self.sigma.clone()).ok_or(Error::DegenerateIterate {
            cond: f64::INFINITY,
        })?;
        Ok(chol.inverse().trace())
    }
}

/// Distance of every iterate to the final one, in spectral norm, plus the
/// consecutive ratios. The final iterate stands in for the exact fixed point,
/// which it approximates to within the stopping tolerance.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    /// `errors[k]` is the distance of iterate `k + 1` (1-based, the start
    /// counting as iterate 1) to the final iterate.
    pub errors: Vec<f64>,
    /// `ratios[k] = errors[k + 1] / errors[k]`.
    pub ratios: Vec<f64>,
}

/// Convergence statistic `C(X) = (p/n) * |sum_i x_i x_i^T / |x_i|^2|`
/// (spectral norm of the unit-normalized scatter). Always at least `p/n`,
/// and computable before any solve.
pub fn c_of_x(data: &DataSet) -> Result<f64> {
    let (p, n) = (data.p(), data.n());
    let mut normalized = data.samples().clone();
    for (i, mut col) in normalized.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroSample { index: i });
        }
        col.scale_mut(1.0 / norm);
    }
    // Same nonzero spectrum either way; work with the smaller Gram matrix.
    let mut gram = if p <= n {
        &normalized * normalized.transpose()
    } else {
        normalized.transpose() * &normalized
    };
    linalg::symmetrize(&mut gram);
    Ok(p as f64 / n as f64 * spectral_norm(&gram)?)
}

/// High-probability upper bound `2 s (1 + 2 sqrt(p/n))^2` on `C(X)` for
/// elliptical data whose shape has spectral norm `s`. Diagnostic only.
pub fn cx_theoretical_bound(spectral_norm_shape: f64, p: usize, n: usize) -> f64 {
    debug_assert!(spectral_norm_shape > 0.0 && p > 0 && n > 0);
    let root = (p as f64 / n as f64).sqrt();
    2.0 * spectral_norm_shape * (1.0 + 2.0 * root) * (1.0 + 2.0 * root)
}

/// Regularization level guaranteeing linear convergence with ratio `r`:
/// anything above `(3 + 1/r) * c - 1`. The `safety` headroom (default 0.01)
/// keeps the inequality strict; a small floor keeps the result positive.
pub fn recommend_alpha(c: f64, r: f64, safety: f64) -> f64 {
    assert!(r > 0.0 && r < 1.0, "target ratio must lie in (0, 1)");
    assert!(c > 0.0, "C(X) must be positive");
    assert!(safety >= 0.0, "safety margin must be nonnegative");
    (1.0 + safety) * ((3.0 + 1.0 / r) * c - 1.0).max(ALPHA_FLOOR)
}

struct IterationOutcome {
    /// Final iterate, in whichever basis the iteration ran.
    mat: DMatrix<f64>,
    /// Quadratic forms at the final iterate.
    quad: Vec<f64>,
    iterations: usize,
    final_step: f64,
    converged: bool,
    /// Recorded iterates when tracing was requested.
    history: Option<Vec<DMatrix<f64>>>,
}

/// Shared fixed-point loop. `samples` holds the data expressed in the
/// iteration basis (`r x n`), `full_dim` the ambient dimension `p` entering
/// the update coefficient and the trace normalization: the iterate acts as
/// `a/(1+a)` on the `full_dim - r` directions orthogonal to the basis.
fn iterate(
    samples: &DMatrix<f64>,
    full_dim: usize,
    config: &RegConfig,
    require_raw_step: bool,
    record: bool,
) -> Result<IterationOutcome> {
    let r = samples.nrows();
    let n = samples.ncols();
    let p = full_dim;
    let alpha = config.alpha;
    let c = alpha / (1.0 + alpha);
    let coeff = (p as f64 / n as f64) / (1.0 + alpha);
    let perp = (p - r) as f64;

    let mut mat = DMatrix::<f64>::identity(r, r) * c;
    let mut history = record.then(|| vec![mat.clone()]);

    // Frobenius distance between the trace-p normalizations of two iterates,
    // accounting for the constant `c` block on the orthogonal complement.
    let scaled_step = |next: &DMatrix<f64>, prev: &DMatrix<f64>| -> f64 {
        let tn = next.trace() + c * perp;
        let tp = prev.trace() + c * perp;
        let pf = p as f64;
        let diff = next * (pf / tn) - prev * (pf / tp);
        let perp_term = pf * c * (1.0 / tn - 1.0 / tp);
        (diff.norm_squared() + perp_term * perp_term * perp).sqrt()
    };

    let mut iterations = 0usize;
    let mut final_step = f64::INFINITY;
    let mut converged = false;
    let mut quad = vec![1.0; n];

    while iterations < config.max_iter {
        let chol = Cholesky::new(mat.clone()).ok_or(Error::DegenerateIterate {
            cond: f64::INFINITY,
        })?;
        linalg::guard_conditioning(&mat, &chol)?;
        quad = linalg::quad_forms(&chol, samples)?;

        let mut next = {
            let mut scaled = samples.clone();
            for (j, qj) in quad.iter().enumerate() {
                scaled.column_mut(j).scale_mut(coeff / qj);
            }
            scaled * samples.transpose()
        };
        linalg::symmetrize(&mut next);
        for i in 0..r {
            next[(i, i)] += c;
        }

        final_step = scaled_step(&next, &mat);
        let raw_step = (&next - &mat).norm();
        let raw_ok = raw_step <= config.tol * next.norm();
        mat = next;
        iterations += 1;
        if let Some(h) = history.as_mut() {
            h.push(mat.clone());
        }
        if final_step < config.tol && (!require_raw_step || raw_ok) {
            converged = true;
            break;
        }
    }

    // Refresh the quadratic forms at the final iterate so weights and the
    // residual refer to the returned matrix.
    let chol = Cholesky::new(mat.clone()).ok_or(Error::DegenerateIterate {
        cond: f64::INFINITY,
    })?;
    quad = linalg::quad_forms(&chol, samples)?;

    Ok(IterationOutcome {
        mat,
        quad,
        iterations,
        final_step,
        converged,
        history,
    })
}

/// Relative Frobenius residual of the fixed-point equation evaluated in the
/// iteration basis; the orthogonal-complement blocks of both sides agree
/// exactly, so only the basis block and its trace mass enter.
fn residual_in_basis(
    samples: &DMatrix<f64>,
    mat: &DMatrix<f64>,
    quad: &[f64],
    full_dim: usize,
    alpha: f64,
) -> f64 {
    let r = samples.nrows();
    let n = samples.ncols();
    let c = alpha / (1.0 + alpha);
    let coeff = (full_dim as f64 / n as f64) / (1.0 + alpha);
    let mut rhs = {
        let mut scaled = samples.clone();
        for (j, qj) in quad.iter().enumerate() {
            scaled.column_mut(j).scale_mut(coeff / qj);
        }
        scaled * samples.transpose()
    };
    linalg::symmetrize(&mut rhs);
    for i in 0..r {
        rhs[(i, i)] += c;
    }
    let num = (&rhs - mat).norm();
    let den = (mat.norm_squared() + c * c * (full_dim - r) as f64).sqrt();
    num / den
}

fn existence_bound(p: usize, n: usize) -> f64 {
    (p as f64 / n as f64 - 1.0).max(0.0)
}

fn check_alpha(config: &RegConfig, p: usize, n: usize) -> Result<bool> {
    if config.alpha.is_nan() || config.alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "alpha = {} must be positive",
            config.alpha
        )));
    }
    let bound = existence_bound(p, n);
    let guaranteed = config.alpha > bound;
    if !guaranteed && !config.force {
        return Err(Error::AlphaTooSmall {
            alpha: config.alpha,
            bound,
        });
    }
    Ok(guaranteed)
}

fn solve(
    data: &DataSet,
    config: &RegConfig,
    record: bool,
) -> Result<(RegSolution, Option<Vec<f64>>)> {
    let (p, n) = (data.p(), data.n());
    let guaranteed = check_alpha(config, p, n)?;
    if config.tol.is_nan() || config.tol <= 0.0 || config.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "tol must be positive and max_iter nonzero".into(),
        ));
    }
    let use_subspace = matches!(config.path, SolverPath::SubspaceAuto) && n < p;
    let c = config.alpha / (1.0 + config.alpha);

    let (outcome, sigma, residual) = if use_subspace {
        // Economy SVD of the sample matrix: the fixed point acts as c * I on
        // the orthogonal complement of the sample span, so it is enough to
        // iterate on coordinates inside that span.
        let svd = SVD::new(data.samples().clone(), true, false);
        let u = svd.u.as_ref().expect("u requested");
        let smax = svd.singular_values.max();
        let cutoff = smax * f64::EPSILON * p.max(n) as f64;
        let kept: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cutoff)
            .collect();
        let mut basis = DMatrix::zeros(p, kept.len());
        for (dst, &src) in kept.iter().enumerate() {
            basis.set_column(dst, &u.column(src));
        }
        let coords = basis.transpose() * data.samples();

        let outcome = iterate(&coords, p, config, guaranteed, record)?;
        let residual = residual_in_basis(&coords, &outcome.mat, &outcome.quad, p, config.alpha);

        let mut centered = outcome.mat.clone();
        for i in 0..centered.nrows() {
            centered[(i, i)] -= c;
        }
        let mut sigma = &basis * centered * basis.transpose();
        for i in 0..p {
            sigma[(i, i)] += c;
        }
        linalg::symmetrize(&mut sigma);
        (outcome, sigma, residual)
    } else {
        let outcome = iterate(data.samples(), p, config, guaranteed, record)?;
        let residual =
            residual_in_basis(data.samples(), &outcome.mat, &outcome.quad, p, config.alpha);
        let sigma = outcome.mat.clone();
        (outcome, sigma, residual)
    };

    let weights: Vec<f64> = outcome.quad.iter().map(|q| 1.0 / q).collect();
    let trace_errors = outcome.history.map(|iterates| {
        let last = iterates.last().expect("history never empty");
        iterates[..iterates.len() - 1]
            .iter()
            .map(|it| {
                let mut diff = last - it;
                linalg::symmetrize(&mut diff);
                spectral_norm(&diff).expect("difference of symmetric iterates")
            })
            .collect::<Vec<f64>>()
    });

    Ok((
        RegSolution {
            sigma,
            weights,
            alpha: config.alpha,
            iterations: outcome.iterations,
            final_step: outcome.final_step,
            residual,
            converged: outcome.converged,
            guaranteed,
        },
        trace_errors,
    ))
}

/// Solves the regularized fixed-point equation.
pub fn reg_tyler(data: &DataSet, config: &RegConfig) -> Result<RegSolution> {
    solve(data, config, false).map(|(sol, _)| sol)
}

/// Like [`reg_tyler`], additionally recording the distance of every iterate
/// to the final one. Costs one iterate copy per step; intended for
/// convergence studies at moderate sizes.
pub fn reg_tyler_traced(
    data: &DataSet,
    config: &RegConfig,
) -> Result<(RegSolution, ConvergenceTrace)> {
    let (sol, errors) = solve(data, config, true)?;
    let errors = errors.expect("tracing requested");
    let ratios = errors.windows(2).map(|w| w[1] / w[0]).collect();
    Ok((sol, ConvergenceTrace { errors, ratios }))
}

/// Unnormalized weights `w_i = 1 / (x_i^T sigma^{-1} x_i)` of a converged
/// solution, recomputed against the given dataset.
pub fn reg_weights(solution: &RegSolution, data: &DataSet) -> Result<Vec<f64>> {
    if !solution.converged {
        return Err(Error::NotConverged);
    }
    if solution.sigma.nrows() != data.p() {
        return Err(Error::DimensionMismatch {
            left: solution.sigma.nrows(),
            right: data.p(),
        });
    }
    let chol = Cholesky::new(solution.sigma.clone()).ok_or(Error::DegenerateIterate {
        cond: f64::INFINITY,
    })?;
    let q = linalg::quad_forms(&chol, data.samples())?;
    Ok(q.iter().map(|v| 1.0 / v).collect())
}
