//! Full Newton, cubic Newton, incremental Newton and a high-accuracy
//! reference solver.

use alloc::vec;

use crate::cubic;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, SolvePolicy, Vector};
use crate::problem::{eval_full, full_gradient, full_value, FiniteSum};
use crate::sampling::SubsetSampler;
use crate::sn::{assemble, SnState};

/// `x - hess f(x)^{-1} grad f(x)`, computed through the same summation and
/// solve as a stochastic Newton step whose anchors all equal `x`.
pub fn newton_step<P: FiniteSum + ?Sized>(problem: &P, x: &Vector, policy: SolvePolicy) -> Result<Vector> {
    linalg::ensure_dim(x, problem.dim())?;
    let anchors = vec![x.clone(); problem.num_components()];
    let (hess, rhs) = assemble(problem, &anchors);
    linalg::spd_solve(&hess, &rhs, policy)
}

/// Minimizer of `f(x) + grad f(x)^T (y - x) + 1/2 (y - x)^T hess f(x) (y - x)
/// + (M/6) ||y - x||^3`.
pub fn cubic_newton_step<P: FiniteSum + ?Sized>(problem: &P, x: &Vector, m: f64, tol: f64) -> Result<Vector> {
    let e = eval_full(problem, x, true)?;
    let h = e.hessian.expect("hessian requested");
    let g = &e.gradient - &h * x;
    cubic::solve_single_anchor(&g, &h, x, m, tol)
}

/// One incremental Newton step: stochastic Newton with `tau = 1` where
/// iteration `k` refreshes component `k mod n`.
pub fn incremental_newton_step<P: FiniteSum + ?Sized, S: SubsetSampler>(
    state: &mut SnState<S>,
    problem: &P,
) -> Result<Vector> {
    if state.tau() != 1 {
        return Err(invalid("incremental Newton needs tau = 1"));
    }
    let i = state.k() % state.num_components();
    state.step_with_subset(problem, &[i])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Target `||grad f(x*)||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Regularization for the cubic Newton fallback.
    pub m_fallback: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
            m_fallback: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    Newton,
    CubicNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vector,
    pub f_star: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub method: ReferenceMethod,
}

/// Full Newton from `x0`, switching to cubic Newton (followed by a Newton
/// polish) if the gradient norm grows on three consecutive steps or a solve
/// fails.
pub fn solve_reference<P: FiniteSum + ?Sized>(
    problem: &P,
    x0: &Vector,
    opts: ReferenceOptions,
) -> Result<ReferenceSolution> {
    linalg::ensure_dim(x0, problem.dim())?;
    if !(opts.tol > 0.0) || !(opts.m_fallback > 0.0) {
        return Err(invalid("tolerance and fallback M must be positive"));
    }
    let mut best = (x0.clone(), full_gradient(problem, x0).norm());
    let mut track = |x: &Vector, gn: f64, best: &mut (Vector, f64)| {
        if gn < best.1 {
            *best = (x.clone(), gn);
        }
    };
    let finish = |x: Vector, grad_norm: f64, iterations: usize, method| ReferenceSolution {
        f_star: full_value(problem, &x),
        x_star: x,
        grad_norm,
        iterations,
        method,
    };

    if let Some((x, gn, it)) = newton_phase(problem, x0.clone(), opts, &mut best, &mut track, true) {
        return Ok(finish(x, gn, it, ReferenceMethod::Newton));
    }

    let mut x = x0.clone();
    let mut gn = full_gradient(problem, &x).norm();
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        if gn <= opts.tol {
            return Ok(finish(x, gn, iterations, ReferenceMethod::CubicNewton));
        }
        let Ok(next) = cubic_newton_step(problem, &x, opts.m_fallback, 1e-14) else {
            break;
        };
        x = next;
        gn = full_gradient(problem, &x).norm();
        track(&x, gn, &mut best);
        iterations += 1;
        // quadratic convergence region: hand over to Newton
        if gn <= 1e-6 {
            if let Some((xp, gp, it)) = newton_phase(problem, x.clone(), opts, &mut best, &mut track, false) {
                return Ok(finish(xp, gp, iterations + it, ReferenceMethod::CubicNewton));
            }
        }
    }
    if gn <= opts.tol {
        return Ok(finish(x, gn, iterations, ReferenceMethod::CubicNewton));
    }
    Err(Error::ReferenceFailed {
        best: best.0.iter().copied().collect(),
        grad_norm: best.1,
    })
}

fn newton_phase<P: FiniteSum + ?Sized>(
    problem: &P,
    mut x: Vector,
    opts: ReferenceOptions,
    best: &mut (Vector, f64),
    track: &mut impl FnMut(&Vector, f64, &mut (Vector, f64)),
    watch_growth: bool,
) -> Option<(Vector, f64, usize)> {
    let mut gn = full_gradient(problem, &x).norm();
    let mut growth = 0;
    for it in 0..opts.max_iter {
        if gn <= opts.tol {
            return Some((x, gn, it));
        }
        let next = newton_step(problem, &x, SolvePolicy::Jitter).ok()?;
        if !linalg::all_finite(&next) {
            return None;
        }
        let g_next = full_gradient(problem, &next).norm();
        track(&next, g_next, best);
        if g_next > gn {
            growth += 1;
            if growth >= 3 && watch_growth {
                return None;
            }
            if !watch_growth && growth >= 3 {
                return None;
            }
        } else {
            growth = 0;
        }
        x = next;
        gn = g_next;
    }
    (gn <= opts.tol).then_some((x, gn, opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::synth_quadratic;

    #[test]
    fn newton_solves_quadratic_in_one_step() {
        let q = synth_quadratic(5, 4, 3, 0.5, 3.0).unwrap();
        let x1 = newton_step(&q, &Vector::zeros(3), SolvePolicy::Error).unwrap();
        assert!((x1 - q.minimizer().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn reference_on_logistic() {
        let p = crate::glm::synth_logistic(2, 30, 4, 1e-2).unwrap();
        let r = solve_reference(&p, &Vector::zeros(4), ReferenceOptions::default()).unwrap();
        assert!(r.grad_norm <= 1e-12);
        assert_eq!(r.method, ReferenceMethod::Newton);
    }

    #[test]
    fn incremental_requires_unit_tau() {
        let q = synth_quadratic(5, 4, 3, 0.5, 3.0).unwrap();
        let mut s = SnState::new(&q, Vector::zeros(3), 2, 0).unwrap();
        assert!(incremental_newton_step(&mut s, &q).is_err());
    }
}
