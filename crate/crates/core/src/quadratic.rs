//! Quadratic finite sums `f_i(x) = 1/2 (x - c_i)^T A_i (x - c_i)`.
//!
//! These have constant Hessians (so `H = 0`), a certified `mu` and a
//! closed-form minimizer, which makes them the exactness fixture for every
//! solver in the crate.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix, SolvePolicy, Vector};
use crate::problem::{ComponentEval, FiniteSum};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSum {
    mats: Vec<Matrix>,
    centers: Vec<Vector>,
    mu: f64,
}

impl QuadraticSum {
    /// Builds the sum from explicit matrices and centers. `mu` is computed as
    /// the smallest eigenvalue over all `A_i` (clamped at zero).
    pub fn new(mats: Vec<Matrix>, centers: Vec<Vector>) -> Result<Self> {
        if mats.is_empty() || mats.len() != centers.len() {
            return Err(invalid("need one center per matrix and at least one component"));
        }
        let d = centers[0].len();
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        for (a, c) in mats.iter().zip(&centers) {
            linalg::ensure_dim(c, d)?;
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.nrows(),
                });
            }
            let asym = (a - a.transpose()).amax();
            if asym > 1e-12 * a.amax().max(1.0) {
                return Err(invalid("component matrix is not symmetric"));
            }
        }
        let mu = mats
            .iter()
            .map(linalg::lambda_min)
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        Ok(Self { mats, centers, mu })
    }

    /// Scalar components `f_i(x) = a_i/2 (x - c_i)^2`.
    pub fn scalar(curvatures: &[f64], centers: &[f64]) -> Result<Self> {
        let mats = curvatures
            .iter()
            .map(|&a| Matrix::from_element(1, 1, a))
            .collect();
        let centers = centers.iter().map(|&c| Vector::from_element(1, c)).collect();
        Self::new(mats, centers)
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn centers(&self) -> &[Vector] {
        &self.centers
    }

    /// Exact minimizer `(sum A_i)^{-1} sum A_i c_i`.
    pub fn minimizer(&self) -> Result<Vector> {
        let d = self.dim();
        let mut a_sum = Matrix::zeros(d, d);
        let mut rhs = Vector::zeros(d);
        for (a, c) in self.mats.iter().zip(&self.centers) {
            a_sum += a;
            rhs += a * c;
        }
        linalg::spd_solve(&a_sum, &rhs, SolvePolicy::Error)
    }
}

impl FiniteSum for QuadraticSum {
    fn num_components(&self) -> usize {
        self.mats.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let r = x - &self.centers[i];
        0.5 * r.dot(&(&self.mats[i] * &r))
    }

    fn gradient(&self, i: usize, x: &Vector) -> Vector {
        &self.mats[i] * (x - &self.centers[i])
    }

    fn hessian(&self, i: usize, _x: &Vector) -> Matrix {
        self.mats[i].clone()
    }

    fn eval(&self, i: usize, x: &Vector) -> ComponentEval {
        let r = x - &self.centers[i];
        let gradient = &self.mats[i] * &r;
        ComponentEval {
            value: 0.5 * r.dot(&gradient),
            gradient,
            hessian: self.mats[i].clone(),
        }
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn hessian_lipschitz(&self) -> f64 {
        0.0
    }
}

/// Deterministic random quadratic finite sum with every `A_i` spectrum in
/// `[mu, l]`.
///
/// Each `A_i = Q_i diag(s_i) Q_i^T` where `Q_i` is the orthogonal factor of
/// a matrix with uniform `[-1, 1]` entries and `s_i` is uniform in `[mu, l]`
/// with its first entry pinned to `mu`. Centers are uniform in `[-1, 1]^d`.
pub fn synth_quadratic(seed: u64, n: usize, d: usize, mu: f64, l: f64) -> Result<QuadraticSum> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid("mu must be positive"));
    }
    if !(l >= mu) || !l.is_finite() {
        return Err(invalid("L must satisfy L >= mu"));
    }
    if n == 0 || d == 0 {
        return Err(invalid("n and d must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = move || 2.0 * rng.random::<f64>() - 1.0;
    let mut mats = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = Matrix::from_fn(d, d, |_, _| uniform());
        let q = raw.qr().q();
        let spectrum = Vector::from_fn(d, |j, _| {
            let u = 0.5 * (uniform() + 1.0);
            if j == 0 {
                mu
            } else {
                mu + (l - mu) * u
            }
        });
        let mut a = &q * Matrix::from_diagonal(&spectrum) * q.transpose();
        linalg::symmetrize(&mut a);
        mats.push(a);
        centers.push(Vector::from_fn(d, |_, _| uniform()));
    }
    let mut problem = QuadraticSum::new(mats, centers)?;
    // Rounding in Q diag Q^T can nudge the smallest eigenvalue a hair below
    // mu; the construction certifies mu itself.
    problem.mu = mu;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::full_gradient;

    #[test]
    fn two_scalar_components_minimizer() {
        let q = QuadraticSum::scalar(&[1.0, 2.0], &[1.0, -1.0]).unwrap();
        let x = q.minimizer().unwrap();
        assert!((x[0] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_single_component() {
        let d = 4;
        let q = QuadraticSum::new(
            alloc::vec![Matrix::identity(d, d)],
            alloc::vec![Vector::from_element(d, 1.0)],
        )
        .unwrap();
        assert_eq!(q.minimizer().unwrap(), Vector::from_element(d, 1.0));
    }

    #[test]
    fn synth_is_deterministic_and_spectrum_bounded() {
        let a = synth_quadratic(11, 5, 4, 0.5, 3.0).unwrap();
        let b = synth_quadratic(11, 5, 4, 0.5, 3.0).unwrap();
        assert_eq!(a, b);
        for m in a.matrices() {
            let eig = m.clone().symmetric_eigen().eigenvalues;
            assert!(eig.min() >= 0.5 - 1e-10);
            assert!(eig.max() <= 3.0 + 1e-10);
        }
        assert_eq!(a.strong_convexity(), 0.5);
    }

    #[test]
    fn synth_minimizer_is_stationary() {
        let q = synth_quadratic(3, 7, 5, 0.1, 10.0).unwrap();
        let x = q.minimizer().unwrap();
        assert!(full_gradient(&q, &x).norm() <= 1e-12);
    }

    #[test]
    fn synth_rejects_bad_parameters() {
        assert!(synth_quadratic(0, 2, 2, 0.0, 1.0).is_err());
        assert!(synth_quadratic(0, 2, 2, 2.0, 1.0).is_err());
    }
}
