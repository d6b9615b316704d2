//! Stochastic Newton.
//!
//! The state keeps one anchor `w_i` per component together with the running
//! sums
//!
//! ```text
//! hess_sum = sum_i hess f_i(w_i)
//! rhs_sum  = sum_i [hess f_i(w_i) w_i - grad f_i(w_i)]
//! ```
//!
//! so that the next iterate is the solution of `hess_sum x = rhs_sum`. After
//! each solve a subset of `tau` components has its anchor moved to the new
//! iterate; the outgoing terms are recomputed at the old anchor and
//! subtracted, so no per-component Hessians are stored.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix, SolvePolicy, Vector};
use crate::problem::FiniteSum;
use crate::sampling::{binomial, for_each_subset, SubsetSampler, UniformSubsets};
use crate::verify::{Certified, Check, StepReport};

/// Largest `C(n, tau)` the verifier will enumerate.
pub const ENUMERATION_BUDGET: u64 = 100_000;

/// Slack used by [`SnState::check_distance_bound`].
pub const DISTANCE_BOUND_SLACK: f64 = 1e-12;

/// Starting anchors: one shared point or one point per component.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialAnchors {
    Common(Vector),
    PerComponent(Vec<Vector>),
}

impl From<Vector> for InitialAnchors {
    fn from(v: Vector) -> Self {
        InitialAnchors::Common(v)
    }
}

impl From<Vec<Vector>> for InitialAnchors {
    fn from(v: Vec<Vector>) -> Self {
        InitialAnchors::PerComponent(v)
    }
}

impl InitialAnchors {
    pub(crate) fn expand(self, n: usize, d: usize) -> Result<(Vec<Vector>, Vector)> {
        let anchors = match self {
            InitialAnchors::Common(v) => {
                linalg::ensure_dim(&v, d)?;
                alloc::vec![v; n]
            }
            InitialAnchors::PerComponent(list) => {
                if list.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: list.len(),
                    });
                }
                for w in &list {
                    linalg::ensure_dim(w, d)?;
                }
                list
            }
        };
        if anchors.iter().any(|w| !linalg::all_finite(w)) {
            return Err(Error::NonFinite);
        }
        let mut mean = Vector::zeros(d);
        for w in &anchors {
            mean += w;
        }
        mean /= n as f64;
        if anchors.iter().all(|w| *w == anchors[0]) {
            mean = anchors[0].clone();
        }
        Ok((anchors, mean))
    }
}

/// Oracle-call accounting. `fresh` counts gradient+Hessian evaluations at
/// new anchor points; `recomputed` counts re-evaluations at outgoing anchors
/// and `init` the initial assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCount {
    pub init: u64,
    pub fresh: u64,
    pub recomputed: u64,
}

/// `(hess f_i(w), hess f_i(w) w - grad f_i(w))`.
pub(crate) fn component_terms<P: FiniteSum + ?Sized>(
    problem: &P,
    i: usize,
    w: &Vector,
) -> (Matrix, Vector) {
    let e = problem.eval(i, w);
    let rhs = &e.hessian * w - &e.gradient;
    (e.hessian, rhs)
}

/// Sums of [`component_terms`] over all components, in index order.
pub(crate) fn assemble<P: FiniteSum + ?Sized>(problem: &P, anchors: &[Vector]) -> (Matrix, Vector) {
    let d = problem.dim();
    let mut hess = Matrix::zeros(d, d);
    let mut rhs = Vector::zeros(d);
    for (i, w) in anchors.iter().enumerate() {
        let (h, r) = component_terms(problem, i, w);
        hess += h;
        rhs += r;
    }
    (hess, rhs)
}

#[derive(Debug, Clone)]
pub struct SnState<S = UniformSubsets> {
    x: Vector,
    anchors: Vec<Vector>,
    hess_sum: Matrix,
    rhs_sum: Vector,
    tau: usize,
    sampler: S,
    k: usize,
    policy: SolvePolicy,
    evals: EvalCount,
    subset: Vec<usize>,
}

impl SnState<UniformSubsets> {
    /// Assembles the sums with one pass over the components and seeds a
    /// uniform subset sampler.
    pub fn new<P: FiniteSum + ?Sized>(
        problem: &P,
        anchors: impl Into<InitialAnchors>,
        tau: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::with_sampler(problem, anchors, tau, UniformSubsets::new(seed))
    }
}

impl<S: SubsetSampler> SnState<S> {
    pub fn with_sampler<P: FiniteSum + ?Sized>(
        problem: &P,
        anchors: impl Into<InitialAnchors>,
        tau: usize,
        sampler: S,
    ) -> Result<Self> {
        let n = problem.num_components();
        if tau == 0 || tau > n {
            return Err(invalid(alloc::format!("tau = {tau} must lie in [1, {n}]")));
        }
        let (anchors, x) = anchors.into().expand(n, problem.dim())?;
        let (hess_sum, rhs_sum) = assemble(problem, &anchors);
        Ok(Self {
            x,
            anchors,
            hess_sum,
            rhs_sum,
            tau,
            sampler,
            k: 0,
            policy: SolvePolicy::Error,
            evals: EvalCount {
                init: n as u64,
                ..EvalCount::default()
            },
            subset: Vec::with_capacity(tau),
        })
    }

    pub fn with_policy(mut self, policy: SolvePolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Current iterate `x^k` (the mean of the initial anchors before the
    /// first step, or their common value).
    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn anchors(&self) -> &[Vector] {
        &self.anchors
    }

    pub fn hess_sum(&self) -> &Matrix {
        &self.hess_sum
    }

    pub fn rhs_sum(&self) -> &Vector {
        &self.rhs_sum
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn evals(&self) -> EvalCount {
        self.evals
    }

    /// Component subset drawn in the most recent step.
    pub fn last_subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn num_components(&self) -> usize {
        self.anchors.len()
    }

    /// Full passes over the data: `fresh / n`.
    pub fn epochs(&self) -> f64 {
        self.evals.fresh as f64 / self.anchors.len() as f64
    }

    /// `x^{k+1}`, which is a deterministic function of the current anchors.
    pub fn next_iterate(&self) -> Result<Vector> {
        linalg::spd_solve(&self.hess_sum, &self.rhs_sum, self.policy)
    }

    /// One iteration: solve, draw `S^k`, move the sampled anchors.
    pub fn step<P: FiniteSum + ?Sized>(&mut self, problem: &P) -> Result<Vector> {
        let x_next = self.next_iterate()?;
        let mut subset = core::mem::take(&mut self.subset);
        self.sampler
            .draw(self.anchors.len(), self.tau, self.k, &mut subset);
        self.replace(problem, &subset, &x_next);
        self.subset = subset;
        self.k += 1;
        self.x = x_next.clone();
        Ok(x_next)
    }

    /// Like [`step`](Self::step) but with a caller-chosen subset.
    pub(crate) fn step_with_subset<P: FiniteSum + ?Sized>(
        &mut self,
        problem: &P,
        subset: &[usize],
    ) -> Result<Vector> {
        let x_next = self.next_iterate()?;
        self.replace(problem, subset, &x_next);
        self.subset.clear();
        self.subset.extend_from_slice(subset);
        self.k += 1;
        self.x = x_next.clone();
        Ok(x_next)
    }

    fn replace<P: FiniteSum + ?Sized>(&mut self, problem: &P, subset: &[usize], x_new: &Vector) {
        let n = self.anchors.len();
        if subset.len() == n {
            for w in &mut self.anchors {
                w.clone_from(x_new);
            }
            let (h, r) = assemble(problem, &self.anchors);
            self.hess_sum = h;
            self.rhs_sum = r;
            self.evals.fresh += n as u64;
            return;
        }
        for &i in subset {
            let (h_old, r_old) = component_terms(problem, i, &self.anchors[i]);
            let (h_new, r_new) = component_terms(problem, i, x_new);
            self.hess_sum -= h_old;
            self.hess_sum += h_new;
            self.rhs_sum -= r_old;
            self.rhs_sum += r_new;
            self.anchors[i].clone_from(x_new);
        }
        self.evals.recomputed += subset.len() as u64;
        self.evals.fresh += subset.len() as u64;
    }

    /// Sums rebuilt from the anchors, for drift checks.
    pub fn recompute_sums<P: FiniteSum + ?Sized>(&self, problem: &P) -> (Matrix, Vector) {
        assemble(problem, &self.anchors)
    }

    /// Largest relative deviation between maintained and fresh sums.
    pub fn sum_drift<P: FiniteSum + ?Sized>(&self, problem: &P) -> f64 {
        let (h, r) = self.recompute_sums(problem);
        let dh = (&self.hess_sum - &h).norm() / h.norm().max(f64::MIN_POSITIVE);
        let dr = (&self.rhs_sum - &r).norm() / r.norm().max(f64::MIN_POSITIVE);
        dh.max(dr)
    }

    /// `W^k = (1/n) sum_i ||w_i - x*||^2`.
    pub fn lyapunov_w(&self, x_star: &Vector) -> f64 {
        lyapunov_w(&self.anchors, x_star)
    }

    /// One-step conditional expectation of `W^{k+1}`, both from the closed
    /// form `(tau/n)||x^{k+1} - x*||^2 + (1 - tau/n) W^k` and, when
    /// `C(n, tau) <= ENUMERATION_BUDGET`, by averaging over every subset.
    pub fn expected_next_w(&self, x_star: &Vector) -> Result<ExpectedW> {
        let n = self.anchors.len();
        let tau = self.tau;
        let next = self.next_iterate()?;
        let w = self.lyapunov_w(x_star);
        let next_dist_sq = (&next - x_star).norm_squared();
        let frac = tau as f64 / n as f64;
        let exact = frac * next_dist_sq + (1.0 - frac) * w;

        let enumerated = match binomial(n, tau) {
            Some(count) if count <= ENUMERATION_BUDGET => {
                let dists: Vec<f64> = self
                    .anchors
                    .iter()
                    .map(|a| (a - x_star).norm_squared())
                    .collect();
                let mut total = 0.0;
                let mut in_subset = alloc::vec![false; n];
                for_each_subset(n, tau, |s| {
                    in_subset.iter_mut().for_each(|b| *b = false);
                    for &i in s {
                        in_subset[i] = true;
                    }
                    let w_next: f64 = (0..n)
                        .map(|i| if in_subset[i] { next_dist_sq } else { dists[i] })
                        .sum::<f64>()
                        / n as f64;
                    total += w_next;
                });
                Some(total / count as f64)
            }
            _ => None,
        };
        Ok(ExpectedW {
            next,
            w,
            next_dist_sq,
            exact,
            enumerated,
        })
    }

    /// `||x^{k+1} - x*|| <= H/(2 mu) W^k`.
    pub fn check_distance_bound(&self, x_star: &Vector, certified: Certified) -> Result<Check> {
        if !(certified.mu > 0.0) {
            return Err(invalid("certified mu must be positive"));
        }
        let next = self.next_iterate()?;
        let lhs = (&next - x_star).norm();
        let rhs = certified.hess_lip / (2.0 * certified.mu) * self.lyapunov_w(x_star);
        Ok(Check::inequality_with("next_distance_bound", lhs, rhs, DISTANCE_BOUND_SLACK))
    }

    /// Runs every per-step check available for the current state. Without
    /// certified constants only the expectation identity is checked.
    pub fn check_theory(&self, x_star: &Vector, certified: Option<Certified>) -> Result<SnStepCheck> {
        let expected = self.expected_next_w(x_star)?;
        let mut report = StepReport::default();
        if let Some(en) = expected.enumerated {
            report
                .checks
                .push(Check::identity("w_expectation_identity", en, expected.exact));
        }
        if let Some(c) = certified.filter(|c| c.mu > 0.0) {
            report.checks.push(self.check_distance_bound(x_star, c)?);

            let n = self.anchors.len() as f64;
            let frac = self.tau as f64 / n;
            let w = expected.w;
            let ratio = c.hess_lip / (2.0 * c.mu);
            let expectation = expected.enumerated.unwrap_or(expected.exact);
            report.checks.push(Check::inequality(
                "w_recursion",
                expectation,
                (1.0 - frac + frac * ratio * ratio * w) * w,
            ));

            let radius = if c.hess_lip > 0.0 {
                c.mu / c.hess_lip
            } else {
                f64::INFINITY
            };
            let max_dist = self
                .anchors
                .iter()
                .map(|a| (a - x_star).norm())
                .fold(0.0, f64::max);
            let contraction = (1.0 - 0.75 * frac) * w;
            let w_cap = radius * radius;
            if max_dist <= radius {
                report.checks.push(Check::inequality(
                    "w_basin_contraction",
                    expectation,
                    contraction,
                ));
                report
                    .checks
                    .push(Check::inequality("w_basin_bound", w, w_cap));
            } else {
                report.checks.push(Check::unmet(
                    "w_basin_contraction",
                    expectation,
                    contraction,
                ));
                report.checks.push(Check::unmet("w_basin_bound", w, w_cap));
            }
        }
        Ok(SnStepCheck { expected, report })
    }
}

/// Average squared anchor distance to `x_star`.
pub fn lyapunov_w(anchors: &[Vector], x_star: &Vector) -> f64 {
    anchors
        .iter()
        .map(|a| (a - x_star).norm_squared())
        .sum::<f64>()
        / anchors.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedW {
    pub next: Vector,
    pub w: f64,
    pub next_dist_sq: f64,
    pub exact: f64,
    pub enumerated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnStepCheck {
    pub expected: ExpectedW,
    pub report: StepReport,
}
