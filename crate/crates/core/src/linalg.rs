//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// What to do when a symmetric system that should be positive definite
/// fails to factorize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolvePolicy {
    /// Report [`Error::NotPositiveDefinite`].
    #[default]
    Error,
    /// Add `1e-10 * trace / d` to the diagonal and retry once.
    Jitter,
}

const JITTER_SCALE: f64 = 1e-10;

fn jittered(a: &Matrix) -> Matrix {
    let d = a.nrows();
    let shift = JITTER_SCALE * math::abs(a.trace()) / d as f64;
    let mut out = a.clone();
    for j in 0..d {
        out[(j, j)] += shift;
    }
    out
}

/// Solves `a * x = b` for symmetric positive definite `a` by Cholesky.
pub fn spd_solve(a: &Matrix, b: &Vector, policy: SolvePolicy) -> Result<Vector> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    match policy {
        SolvePolicy::Error => Err(Error::NotPositiveDefinite),
        SolvePolicy::Jitter => jittered(a)
            .cholesky()
            .map(|c| c.solve(b))
            .ok_or(Error::NotPositiveDefinite),
    }
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Replaces `m` with `(m + m^T) / 2`.
pub fn symmetrize(m: &mut Matrix) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(a: &Matrix) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(a: &Matrix) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.amax()
}

/// Estimate of the largest eigenvalue of a symmetric PSD matrix by power
/// iteration from the all-ones vector.
pub fn power_lambda_max(a: &Matrix, rounds: usize) -> f64 {
    let d = a.nrows();
    if d == 0 {
        return 0.0;
    }
    let mut v = Vector::from_element(d, 1.0 / math::sqrt(d as f64));
    let mut estimate = 0.0;
    for _ in 0..rounds {
        let w = a * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = v.dot(&w);
        v = w / norm;
    }
    let w = a * &v;
    estimate.max(v.dot(&w))
}

/// `max_ij |(b * h - I)_ij|`.
pub fn inverse_residual(b: &Matrix, h: &Matrix) -> f64 {
    let mut prod = b * h;
    for j in 0..prod.nrows() {
        prod[(j, j)] -= 1.0;
    }
    prod.amax()
}

pub(crate) fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn ensure_dim(v: &Vector, d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_psd() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = Vector::from_vec(alloc::vec![1.0, 1.0]);
        assert_eq!(spd_solve(&a, &b, SolvePolicy::Error), Err(Error::NotPositiveDefinite));
        let x = spd_solve(&a, &b, SolvePolicy::Jitter).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let exact = (5.0 + math::sqrt(5.0)) / 2.0;
        assert!((power_lambda_max(&a, 50) - exact).abs() < 1e-10);
    }

    #[test]
    fn inverse_has_small_residual() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = spd_inverse(&a).unwrap();
        assert!(inverse_residual(&inv, &a) < 1e-14);
    }
}
