//! Finite-sum objectives `f(x) = (1/n) sum_i f_i(x)` and their oracles.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Value, gradient and Hessian of one component at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentEval {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: Matrix,
}

/// Averaged oracle output for the full objective.
#[derive(Debug, Clone, PartialEq)]
pub struct FullEval {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: Option<Matrix>,
}

/// A twice-differentiable finite-sum objective.
///
/// Components are indexed `0..num_components()`. Implementations must be
/// pure functions of `(i, x)` and must return symmetric Hessians.
pub trait FiniteSum {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    fn value(&self, i: usize, x: &Vector) -> f64;

    fn gradient(&self, i: usize, x: &Vector) -> Vector;

    fn hessian(&self, i: usize, x: &Vector) -> Matrix;

    fn eval(&self, i: usize, x: &Vector) -> ComponentEval {
        ComponentEval {
            value: self.value(i, x),
            gradient: self.gradient(i, x),
            hessian: self.hessian(i, x),
        }
    }

    /// Certified lower bound on the strong convexity of every component, or
    /// `0.0` when unknown.
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// Certified upper bound on the Hessian Lipschitz constant of every
    /// component, or `0.0` when unknown (or when the Hessian is constant).
    fn hessian_lipschitz(&self) -> f64 {
        0.0
    }
}

fn check_point<P: FiniteSum + ?Sized>(problem: &P, x: &Vector) -> Result<()> {
    linalg::ensure_dim(x, problem.dim())?;
    if !linalg::all_finite(x) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Checked oracle call for component `i`.
pub fn eval_component<P: FiniteSum + ?Sized>(
    problem: &P,
    i: usize,
    x: &Vector,
) -> Result<ComponentEval> {
    let n = problem.num_components();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    check_point(problem, x)?;
    Ok(problem.eval(i, x))
}

/// Checked full-objective evaluation: means of the component results.
pub fn eval_full<P: FiniteSum + ?Sized>(
    problem: &P,
    x: &Vector,
    want_hessian: bool,
) -> Result<FullEval> {
    check_point(problem, x)?;
    let n = problem.num_components();
    let d = problem.dim();
    let mut value = 0.0;
    let mut gradient = Vector::zeros(d);
    let mut hessian = want_hessian.then(|| Matrix::zeros(d, d));
    for i in 0..n {
        value += problem.value(i, x);
        gradient += problem.gradient(i, x);
        if let Some(h) = hessian.as_mut() {
            *h += problem.hessian(i, x);
        }
    }
    let scale = 1.0 / n as f64;
    Ok(FullEval {
        value: value * scale,
        gradient: gradient * scale,
        hessian: hessian.map(|h| h * scale),
    })
}

/// Unchecked `f(x)`.
pub fn full_value<P: FiniteSum + ?Sized>(problem: &P, x: &Vector) -> f64 {
    let n = problem.num_components();
    (0..n).map(|i| problem.value(i, x)).sum::<f64>() / n as f64
}

/// Unchecked `grad f(x)`.
pub fn full_gradient<P: FiniteSum + ?Sized>(problem: &P, x: &Vector) -> Vector {
    let n = problem.num_components();
    let mut g = Vector::zeros(problem.dim());
    for i in 0..n {
        g += problem.gradient(i, x);
    }
    g / n as f64
}

/// Empirical surrogates for the regularity constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEstimates {
    /// Smallest component Hessian eigenvalue seen at the sample points.
    pub mu_hat: f64,
    /// Largest observed Hessian difference quotient over sample pairs.
    pub hess_lip_hat: f64,
}

/// Estimates `mu` and `H` from sample points. These are observations, not
/// certificates: `mu_hat` can only overestimate the true `mu` and
/// `hess_lip_hat` can only underestimate the true `H`.
pub fn estimate_constants<P: FiniteSum + ?Sized>(
    problem: &P,
    points: &[Vector],
) -> Result<ConstantEstimates> {
    if points.len() < 2 {
        return Err(crate::error::invalid("need at least two sample points"));
    }
    for p in points {
        check_point(problem, p)?;
    }
    let n = problem.num_components();
    let hessians: Vec<Vec<Matrix>> = points
        .iter()
        .map(|p| (0..n).map(|i| problem.hessian(i, p)).collect())
        .collect();

    let mut mu_hat = f64::INFINITY;
    for per_point in &hessians {
        for h in per_point {
            mu_hat = mu_hat.min(linalg::lambda_min(h));
        }
    }

    let mut hess_lip_hat = 0.0_f64;
    let mut usable_pairs = 0usize;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            let dist = (&points[a] - &points[b]).norm();
            if dist == 0.0 {
                continue;
            }
            usable_pairs += 1;
            for i in 0..n {
                let diff = &hessians[a][i] - &hessians[b][i];
                hess_lip_hat = hess_lip_hat.max(linalg::sym_spectral_norm(&diff) / dist);
            }
        }
    }
    if usable_pairs == 0 {
        return Err(Error::DegenerateSamples);
    }
    Ok(ConstantEstimates {
        mu_hat,
        hess_lip_hat,
    })
}
