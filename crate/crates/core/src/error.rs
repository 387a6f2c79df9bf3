//! Error type shared by all estimation and data-generation routines.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix handed to `ShapeMatrix::new` violates one of its invariants.
    #[error("invalid shape matrix: {0}")]
    InvalidShape(String),

    /// Tyler's M-estimator needs strictly more samples than dimensions.
    #[error("estimator undefined for n = {n} <= p = {p}")]
    Existence { p: usize, n: usize },

    /// Regularization below the existence bound and forcing was not requested.
    #[error("alpha = {alpha} is not above the existence bound max(0, p/n - 1) = {bound}")]
    AlphaTooSmall { alpha: f64, bound: f64 },

    /// An iterate became numerically singular. With generic data this points at
    /// a subspace concentration that violates Kent's existence condition.
    #[error(
        "iterate numerically singular (condition estimate {cond:.3e} above 1e14); \
         data may concentrate on a low-dimensional subspace (Kent's condition)"
    )]
    DegenerateIterate { cond: f64 },

    #[error("sample {index} is the exact zero vector")]
    ZeroSample { index: usize },

    #[error("pairwise differencing needs an even number of samples, got {count}")]
    OddPairCount { count: usize },

    #[error("non-finite quadratic form for sample {index}")]
    NonFiniteWeight { index: usize },

    #[error("solution has not converged; rerun with a larger iteration cap")]
    NotConverged,

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})")]
    NotSymmetric { asym: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("logarithm of a nonpositive mean ({0})")]
    NonPositiveMean(f64),

    /// Kernel density estimation cannot work with fewer than two distinct values.
    #[error("degenerate density input: {0}")]
    DegenerateDensity(String),

    /// The centered regularized solution has zero trace; the fixed point is the
    /// pure identity target and carries no shape information.
    #[error("regularized solution equals the identity target; centered trace is zero")]
    AllIdentity,

    /// Weight screening excluded so many samples that re-estimation is ill-posed.
    #[error("screening kept {kept} samples but re-estimation needs at least {needed}")]
    ScreeningFailed { kept: usize, needed: usize },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
