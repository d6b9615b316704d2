//! Stochastic cubic Newton.
//!
//! Each component is replaced by its second-order model around its anchor,
//!
//! ```text
//! phi_i(x) = f_i(w_i) + grad f_i(w_i)^T (x - w_i) + 1/2 (x - w_i)^T hess f_i(w_i) (x - w_i)
//! ```
//!
//! and the next iterate minimizes `(1/n) sum_i [phi_i(x) + (M/6) ||x - w_i||^3]`.
//! The models are kept as aggregated quadratic coefficients so that only
//! the anchors (or, in l3 mode, their coordinate sums) enter the cube term.

use alloc::vec::Vec;

use crate::cubic::{self, AnchorSet, CubeSums, CubicModel, InnerOptions, NormMode};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::math;
use crate::problem::{full_value, FiniteSum};
use crate::sampling::{binomial, for_each_subset, SubsetSampler, UniformSubsets};
use crate::sn::{EvalCount, InitialAnchors, ENUMERATION_BUDGET};
use crate::verify::{Certified, Check, StepReport};

/// Suboptimality below `-BAD_REFERENCE_TOL` means `f*` is wrong.
pub const BAD_REFERENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScnConfig {
    pub tau: usize,
    pub m: f64,
    pub norm: NormMode,
    pub inner: InnerOptions,
}

impl ScnConfig {
    pub fn new(tau: usize, m: f64) -> Self {
        Self {
            tau,
            m,
            norm: NormMode::L2,
            inner: InnerOptions::default(),
        }
    }

    pub fn with_norm(mut self, norm: NormMode) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_inner(mut self, inner: InnerOptions) -> Self {
        self.inner = inner;
        self
    }
}

struct Terms {
    hess: Matrix,
    lin: Vector,
    constant: f64,
}

fn component_terms<P: FiniteSum + ?Sized>(problem: &P, i: usize, w: &Vector) -> Terms {
    let e = problem.eval(i, w);
    let hw = &e.hessian * w;
    let lin = &e.gradient - &hw;
    let constant = e.value - e.gradient.dot(w) + 0.5 * w.dot(&hw);
    Terms {
        hess: e.hessian,
        lin,
        constant,
    }
}

#[derive(Debug, Clone)]
pub struct ScnState<S = UniformSubsets> {
    x: Vector,
    anchors: Vec<Vector>,
    hess_sum: Matrix,
    lin_sum: Vector,
    const_sum: f64,
    cubes: CubeSums,
    config: ScnConfig,
    sampler: S,
    k: usize,
    evals: EvalCount,
    subset: Vec<usize>,
    last_inner_iterations: usize,
}

impl ScnState<UniformSubsets> {
    pub fn new<P: FiniteSum + ?Sized>(
        problem: &P,
        anchors: impl Into<InitialAnchors>,
        config: ScnConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::with_sampler(problem, anchors, config, UniformSubsets::new(seed))
    }
}

impl<S: SubsetSampler> ScnState<S> {
    pub fn with_sampler<P: FiniteSum + ?Sized>(
        problem: &P,
        anchors: impl Into<InitialAnchors>,
        config: ScnConfig,
        sampler: S,
    ) -> Result<Self> {
        let n = problem.num_components();
        if config.tau == 0 || config.tau > n {
            return Err(invalid(alloc::format!("tau = {} must lie in [1, {n}]", config.tau)));
        }
        if !(config.m > 0.0) || !config.m.is_finite() {
            return Err(invalid("M must be positive"));
        }
        if !(config.inner.tol > 0.0) || config.inner.max_iter == 0 {
            return Err(invalid("inner tolerance and iteration cap must be positive"));
        }
        let (anchors, x) = anchors.into().expand(n, problem.dim())?;
        let mut state = Self {
            x,
            cubes: CubeSums::from_anchors(&anchors),
            anchors,
            hess_sum: Matrix::zeros(0, 0),
            lin_sum: Vector::zeros(0),
            const_sum: 0.0,
            config,
            sampler,
            k: 0,
            evals: EvalCount {
                init: n as u64,
                ..EvalCount::default()
            },
            subset: Vec::with_capacity(config.tau),
            last_inner_iterations: 0,
        };
        state.rebuild(problem);
        Ok(state)
    }

    fn rebuild<P: FiniteSum + ?Sized>(&mut self, problem: &P) {
        let d = problem.dim();
        self.hess_sum = Matrix::zeros(d, d);
        self.lin_sum = Vector::zeros(d);
        self.const_sum = 0.0;
        for (i, w) in self.anchors.iter().enumerate() {
            let t = component_terms(problem, i, w);
            self.hess_sum += t.hess;
            self.lin_sum += t.lin;
            self.const_sum += t.constant;
        }
        self.cubes = CubeSums::from_anchors(&self.anchors);
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn anchors(&self) -> &[Vector] {
        &self.anchors
    }

    pub fn config(&self) -> &ScnConfig {
        &self.config
    }

    pub fn cube_sums(&self) -> &CubeSums {
        &self.cubes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn evals(&self) -> EvalCount {
        self.evals
    }

    pub fn last_subset(&self) -> &[usize] {
        &self.subset
    }

    /// Inner-solver iterations used by the most recent step.
    pub fn last_inner_iterations(&self) -> usize {
        self.last_inner_iterations
    }

    pub fn epochs(&self) -> f64 {
        self.evals.fresh as f64 / self.anchors.len() as f64
    }

    /// The averaged cubic model at the current anchors.
    pub fn model(&self) -> CubicModel<'_> {
        let n = self.anchors.len() as f64;
        let anchors = match self.config.norm {
            NormMode::L2 => AnchorSet::Explicit(&self.anchors),
            NormMode::L3 => AnchorSet::Sums(&self.cubes),
        };
        CubicModel {
            g: &self.lin_sum / n,
            h: &self.hess_sum / n,
            anchors,
            m: self.config.m,
            constant: self.const_sum / n,
        }
    }

    /// `(1/n) sum_i phi_i(x)` from the maintained aggregates.
    pub fn model_value(&self, x: &Vector) -> f64 {
        let n = self.anchors.len() as f64;
        (self.const_sum + self.lin_sum.dot(x) + 0.5 * x.dot(&(&self.hess_sum * x))) / n
    }

    /// `(1/n) sum_i phi_i(x)` evaluated directly from the component oracles.
    pub fn model_value_direct<P: FiniteSum + ?Sized>(&self, problem: &P, x: &Vector) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.anchors.iter().enumerate() {
            let e = problem.eval(i, w);
            let u = x - w;
            total += e.value + e.gradient.dot(&u) + 0.5 * u.dot(&(&e.hessian * &u));
        }
        total / self.anchors.len() as f64
    }

    fn solve_inner(&self) -> Result<(Vector, usize)> {
        let model = self.model();
        let common = self.anchors.iter().all(|w| *w == self.anchors[0]);
        if self.config.norm == NormMode::L2 && common {
            let x = cubic::solve_single_anchor(&model.g, &model.h, &self.anchors[0], model.m, self.config.inner.tol)?;
            return Ok((x, 0));
        }
        let sol = cubic::solve_multi_anchor(&model, self.config.norm, self.config.inner)?;
        Ok((sol.x, sol.iterations))
    }

    /// `x^{k+1}` for the current anchors.
    pub fn next_iterate(&self) -> Result<Vector> {
        self.solve_inner().map(|(x, _)| x)
    }

    pub fn step<P: FiniteSum + ?Sized>(&mut self, problem: &P) -> Result<Vector> {
        let (x_next, iters) = self.solve_inner()?;
        if !linalg::all_finite(&x_next) {
            return Err(Error::NonFinite);
        }
        let mut subset = core::mem::take(&mut self.subset);
        self.sampler
            .draw(self.anchors.len(), self.config.tau, self.k, &mut subset);
        self.replace(problem, &subset, &x_next);
        self.subset = subset;
        self.k += 1;
        self.last_inner_iterations = iters;
        self.x = x_next.clone();
        Ok(x_next)
    }

    fn replace<P: FiniteSum + ?Sized>(&mut self, problem: &P, subset: &[usize], x_new: &Vector) {
        let n = self.anchors.len();
        self.evals.fresh += subset.len() as u64;
        if subset.len() == n {
            for w in &mut self.anchors {
                w.clone_from(x_new);
            }
            self.rebuild(problem);
            return;
        }
        for &i in subset {
            let old = component_terms(problem, i, &self.anchors[i]);
            let new = component_terms(problem, i, x_new);
            self.hess_sum -= old.hess;
            self.hess_sum += new.hess;
            self.lin_sum -= old.lin;
            self.lin_sum += new.lin;
            self.const_sum += new.constant - old.constant;
            self.cubes.remove(&self.anchors[i]);
            self.cubes.add(x_new);
            self.anchors[i].clone_from(x_new);
        }
        self.evals.recomputed += subset.len() as u64;
    }

    /// Clamped per-anchor suboptimalities `f(w_i) - f*`.
    fn suboptimalities<P: FiniteSum + ?Sized>(&self, problem: &P, f_star: f64) -> Result<Vec<f64>> {
        self.anchors
            .iter()
            .map(|w| clamp_gap(full_value(problem, w) - f_star))
            .collect()
    }

    /// `V^k = (1/n) sum_i (f(w_i) - f*)^{3/2}`.
    pub fn lyapunov_v<P: FiniteSum + ?Sized>(&self, problem: &P, f_star: f64) -> Result<f64> {
        let gaps = self.suboptimalities(problem, f_star)?;
        Ok(gaps.iter().map(|&g| math::pow_three_halves(g)).sum::<f64>() / gaps.len() as f64)
    }

    /// Per-step checks for the current state. The Lyapunov identity is
    /// always checked (when enumeration fits the budget); the inequalities
    /// need certified constants with `mu > 0`, the l2 norm, and `M >= H`.
    pub fn check_theory<P: FiniteSum + ?Sized>(
        &self,
        problem: &P,
        x_star: &Vector,
        f_star: f64,
        certified: Option<Certified>,
    ) -> Result<ScnStepCheck> {
        let n = self.anchors.len();
        let tau = self.config.tau;
        let frac = tau as f64 / n as f64;
        let next = self.next_iterate()?;
        let f_next = full_value(problem, &next);
        let next_gap = clamp_gap(f_next - f_star)?;
        let gaps = self.suboptimalities(problem, f_star)?;
        let powers: Vec<f64> = gaps.iter().map(|&g| math::pow_three_halves(g)).collect();
        let v = powers.iter().sum::<f64>() / n as f64;
        let next_power = math::pow_three_halves(next_gap);
        let exact = (1.0 - frac) * v + frac * next_power;

        let enumerated = match binomial(n, tau) {
            Some(count) if count <= ENUMERATION_BUDGET => {
                let mut total = 0.0;
                let mut mark = alloc::vec![false; n];
                for_each_subset(n, tau, |s| {
                    mark.iter_mut().for_each(|b| *b = false);
                    for &i in s {
                        mark[i] = true;
                    }
                    total += (0..n)
                        .map(|i| if mark[i] { next_power } else { powers[i] })
                        .sum::<f64>()
                        / n as f64;
                });
                Some(total / count as f64)
            }
            _ => None,
        };

        let mut report = StepReport::default();
        if let Some(en) = enumerated {
            report.checks.push(Check::identity("v_expectation_identity", en, exact));
        }
        let expectation = enumerated.unwrap_or(exact);

        let certified = certified.filter(|c| c.mu > 0.0 && self.config.norm == NormMode::L2);
        if let Some(c) = certified {
            let m = self.config.m;
            let mh = m + c.hess_lip;
            let premise = m >= c.hess_lip;
            let constant = core::f64::consts::SQRT_2 * mh / (3.0 * math::pow_three_halves(c.mu));
            let push = |report: &mut StepReport, name, lhs, rhs, ok: bool| {
                report.checks.push(if ok {
                    Check::inequality(name, lhs, rhs)
                } else {
                    Check::unmet(name, lhs, rhs)
                });
            };

            let upper = self.model_value(&next) + cubic::l2_penalty_eval(&next, &self.anchors, m).0;
            push(&mut report, "model_upper_bound", f_next, upper, premise);

            let cube_dist: f64 = self
                .anchors
                .iter()
                .map(|w| {
                    let r = (x_star - w).norm();
                    r * r * r
                })
                .sum();
            push(
                &mut report,
                "value_bound_at_optimum",
                f_next,
                f_star + mh / (6.0 * n as f64) * cube_dist,
                premise,
            );
            push(&mut report, "next_gap_bound", next_gap, constant * v, premise);
            push(
                &mut report,
                "v_recursion",
                expectation,
                (1.0 - frac + frac * math::pow_three_halves(constant) * math::sqrt(v)) * v,
                premise,
            );
            let basin = 2.0 * c.mu * c.mu * c.mu / (mh * mh);
            let in_basin = gaps.iter().all(|&g| g <= basin);
            push(
                &mut report,
                "v_basin_contraction",
                expectation,
                (1.0 - 0.5 * frac) * v,
                premise && in_basin,
            );
        }
        Ok(ScnStepCheck {
            next,
            v,
            next_gap,
            exact,
            enumerated,
            report,
        })
    }
}

fn clamp_gap(gap: f64) -> Result<f64> {
    if gap < -BAD_REFERENCE_TOL || gap.is_nan() {
        return Err(Error::BadReference(gap));
    }
    Ok(gap.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScnStepCheck {
    pub next: Vector,
    pub v: f64,
    /// `f(x^{k+1}) - f*`, clamped at zero.
    pub next_gap: f64,
    pub exact: f64,
    pub enumerated: Option<f64>,
    pub report: StepReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticSum;
    use alloc::vec;

    fn v1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn model_aggregates_match_direct() {
        let q = QuadraticSum::scalar(&[1.0, 3.0, 2.0], &[0.5, -1.0, 2.0]).unwrap();
        let mut s = ScnState::new(&q, vec![v1(1.0), v1(-2.0), v1(0.3)], ScnConfig::new(1, 1.0), 4).unwrap();
        for _ in 0..5 {
            s.step(&q).unwrap();
        }
        for x in [-1.0, 0.0, 2.5] {
            let a = s.model_value(&v1(x));
            let b = s.model_value_direct(&q, &v1(x));
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        assert!(s.cube_sums().deviation(s.anchors()) < 1e-12);
    }

    #[test]
    fn rejects_bad_reference() {
        let q = QuadraticSum::scalar(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let s = ScnState::new(&q, v1(1.0), ScnConfig::new(1, 1.0), 0).unwrap();
        assert!(s.lyapunov_v(&q, 0.0).is_ok());
        assert!(matches!(s.lyapunov_v(&q, 10.0), Err(Error::BadReference(_))));
    }

    #[test]
    fn converges_on_quadratic() {
        let q = crate::quadratic::synth_quadratic(3, 5, 3, 1.0, 4.0).unwrap();
        let x_star = q.minimizer().unwrap();
        let mut s = ScnState::new(&q, Vector::zeros(3), ScnConfig::new(2, 1.0), 8).unwrap();
        for _ in 0..60 {
            s.step(&q).unwrap();
        }
        assert!((s.x() - x_star).norm() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let q = QuadraticSum::scalar(&[1.0], &[0.0]).unwrap();
        assert!(ScnState::new(&q, v1(0.0), ScnConfig::new(1, 0.0), 0).is_err());
        assert!(ScnState::new(&q, v1(0.0), ScnConfig::new(2, 1.0), 0).is_err());
    }
}
