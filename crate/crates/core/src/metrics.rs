//! Error metrics and sparsity diagnostics: spectral norm, relative spectral
//! error, the log relative error (LRE) aggregate, and row-wise lq statistics.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::datagen::ShapeMatrix;
use crate::error::{Error, Result};
use crate::linalg;

/// Asymmetry allowed before `spectral_norm` rejects its input.
const SYMMETRY_TOL: f64 = 1e-8;

/// Largest absolute eigenvalue of a symmetric matrix.
///
/// Computed through a dense symmetric eigendecomposition, which is
/// deterministic and accurate to machine precision. Inputs whose max
/// asymmetry exceeds 1e-8 are rejected; smaller asymmetries are averaged out
/// before decomposing.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::EmptyInput("spectral_norm of a 0x0 matrix"));
    }
    let asym = linalg::max_asymmetry(a);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asym });
    }
    let mut sym = a.clone();
    linalg::symmetrize(&mut sym);
    let eigen = SymmetricEigen::new(sym);
    Ok(eigen
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, l| acc.max(l.abs())))
}

/// Relative spectral-norm estimation error `|est - truth| / |truth|`.
pub fn relative_spectral_error(est: &DMatrix<f64>, truth: &ShapeMatrix) -> Result<f64> {
    if est.nrows() != truth.dim() || est.ncols() != truth.dim() {
        return Err(Error::DimensionMismatch {
            left: est.nrows(),
            right: truth.dim(),
        });
    }
    let diff = est - truth.matrix();
    Ok(spectral_norm(&diff)? / spectral_norm(truth.matrix())?)
}

/// Natural log of the mean relative error over a batch of realizations.
pub fn lre(relative_errors: &[f64]) -> Result<f64> {
    if relative_errors.is_empty() {
        return Err(Error::EmptyInput("lre of an empty error list"));
    }
    let mean = relative_errors.iter().sum::<f64>() / relative_errors.len() as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::NonPositiveMean(mean));
    }
    Ok(mean.ln())
}

/// Row-wise sparsity diagnostics of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityStats {
    /// Exponent of the lq quasi-norm, in `[0, 1]`.
    pub q: f64,
    /// Max over rows of `sum_j |a_ij|^q`, diagonal included, with `0^0 = 0`.
    pub max_row_lq: f64,
    /// Largest diagonal entry.
    pub max_diag: f64,
}

impl SparsityStats {
    /// Whether the matrix sits inside the sparsity class with row budget
    /// `s_p` and diagonal bound `m`.
    pub fn member_of(&self, s_p: f64, m: f64) -> bool {
        self.max_diag <= m && self.max_row_lq <= s_p
    }
}

/// Computes `SparsityStats` for exponent `q`. With `q = 0` the row statistic
/// counts nonzero entries (`0^0` treated as zero).
pub fn sparsity_stats(a: &DMatrix<f64>, q: f64) -> Result<SparsityStats> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("q = {q} outside [0, 1]")));
    }
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: a.ncols(),
        });
    }
    let p = a.nrows();
    let mut max_row_lq = 0.0f64;
    let mut max_diag = f64::NEG_INFINITY;
    for i in 0..p {
        let mut row = 0.0;
        for j in 0..p {
            let v = a[(i, j)].abs();
            if v > 0.0 {
                row += if q == 0.0 { 1.0 } else { v.powf(q) };
            }
        }
        max_row_lq = max_row_lq.max(row);
        max_diag = max_diag.max(a[(i, i)]);
    }
    Ok(SparsityStats {
        q,
        max_row_lq,
        max_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::ar_shape;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    /// Cyclic Jacobi eigenvalue sweep, kept independent of the nalgebra
    /// decomposition used by the implementation.
    fn jacobi_spectral_norm(a: &DMatrix<f64>) -> f64 {
        let mut m = a.clone();
        let p = m.nrows();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..p {
                for j in (i + 1)..p {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
            if off.sqrt() < 1e-14 {
                break;
            }
            for i in 0..p {
                for j in (i + 1)..p {
                    if m[(i, j)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * m[(i, j)]).atan2(m[(i, i)] - m[(j, j)]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..p {
                        let mki = m[(k, i)];
                        let mkj = m[(k, j)];
                        m[(k, i)] = c * mki + s * mkj;
                        m[(k, j)] = -s * mki + c * mkj;
                    }
                    for k in 0..p {
                        let mik = m[(i, k)];
                        let mjk = m[(j, k)];
                        m[(i, k)] = c * mik + s * mjk;
                        m[(j, k)] = -s * mik + c * mjk;
                    }
                }
            }
        }
        (0..p).fold(0.0f64, |acc, i| acc.max(m[(i, i)].abs()))
    }

    #[test]
    fn spectral_norm_of_identity() {
        let a = DMatrix::<f64>::identity(5, 5);
        assert_relative_eq!(spectral_norm(&a).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn spectral_norm_of_signed_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, -4.0]));
        assert_relative_eq!(spectral_norm(&a).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn spectral_norm_matches_jacobi_oracle() {
        // Fixed pseudo-random symmetric 8x8, frozen so the oracle comparison
        // is reproducible.
        let p = 8;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = next();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let by_eigen = spectral_norm(&a).unwrap();
        let by_jacobi = jacobi_spectral_norm(&a);
        assert_relative_eq!(by_eigen, by_jacobi, epsilon = 1e-10);
    }

    #[test]
    fn spectral_norm_rejects_asymmetry() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spectral_norm(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn relative_error_basics() {
        let truth = ar_shape(4, 0.7).unwrap();
        assert_relative_eq!(
            relative_spectral_error(truth.matrix(), &truth).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        let doubled = truth.matrix() * 2.0;
        assert_relative_eq!(
            relative_spectral_error(&doubled, &truth).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let t = 0.3;
        let shifted = truth.matrix() + DMatrix::identity(4, 4) * t;
        let norm = spectral_norm(truth.matrix()).unwrap();
        assert_relative_eq!(
            relative_spectral_error(&shifted, &truth).unwrap(),
            t / norm,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lre_values() {
        let hundred = vec![0.1; 100];
        assert_relative_eq!(lre(&hundred).unwrap(), 0.1f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(lre(&[std::f64::consts::E]).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(lre(&[0.1, 0.3]).unwrap(), 0.2f64.ln(), epsilon = 1e-12);
        assert!(lre(&[]).is_err());
        assert!(lre(&[0.0]).is_err());
    }

    #[test]
    fn lre_is_monotone_in_each_entry() {
        let base = lre(&[0.1, 0.2, 0.3]).unwrap();
        let bumped = lre(&[0.1, 0.25, 0.3]).unwrap();
        assert!(bumped > base);
    }

    #[test]
    fn sparsity_of_ar_shape_approaches_row_budget() {
        // Middle rows of the 0.7-decay shape have l1 mass 1 + 2 * 0.7 / 0.3
        // in the limit; at p = 201 the geometric tail is below 1e-12.
        let shape = ar_shape(201, 0.7).unwrap();
        let stats = sparsity_stats(shape.matrix(), 1.0).unwrap();
        assert_relative_eq!(stats.max_row_lq, 17.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(stats.max_diag, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sparsity_counts_support_at_q_zero() {
        let id = DMatrix::<f64>::identity(6, 6);
        let stats = sparsity_stats(&id, 0.0).unwrap();
        assert_eq!(stats.max_row_lq, 1.0);
        assert!(stats.member_of(1.0, 1.0));
    }

    #[test]
    fn row_l1_bounds_spectral_norm_on_ar_shapes() {
        // Gershgorin: for a symmetric matrix the spectral norm is at most the
        // largest absolute row sum.
        for rho in [0.3, 0.5, 0.7, 0.9] {
            let shape = ar_shape(40, rho).unwrap();
            let stats = sparsity_stats(shape.matrix(), 1.0).unwrap();
            let norm = spectral_norm(shape.matrix()).unwrap();
            assert!(norm <= stats.max_row_lq + 1e-10, "rho = {rho}");
        }
    }

    #[test]
    fn spectral_norm_invariant_under_rotation() {
        use crate::datagen::{haar_orthogonal, StreamKey, StreamRole};
        let mut rng = StreamKey::new(7, 0).rng(StreamRole::Basis);
        let q = haar_orthogonal(6, &mut rng);
        let shape = ar_shape(6, 0.6).unwrap();
        let rotated = &q * shape.matrix() * q.transpose();
        let mut sym = rotated.clone();
        crate::linalg::symmetrize(&mut sym);
        assert_relative_eq!(
            spectral_norm(&sym).unwrap(),
            spectral_norm(shape.matrix()).unwrap(),
            epsilon = 1e-9
        );
    }
}
