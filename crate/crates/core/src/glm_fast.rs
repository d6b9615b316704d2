//! O(d^2)-per-step Stochastic Newton for per-sample l2-regularized GLMs.
//!
//! For `f_i(x) = phi_i(a_i^T x) + lambda/2 ||x||^2` the anchor state reduces
//! to three scalars per sample,
//!
//! ```text
//! alpha_i = phi_i'(a_i^T w_i),  beta_i = phi_i''(a_i^T w_i),  gamma_i = a_i^T w_i,
//! ```
//!
//! and the step is `x = B (h - g)` with `g = (1/n) sum alpha_i a_i`,
//! `h = (1/n) sum beta_i gamma_i a_i` and
//! `B = (lambda I + (1/n) sum beta_i a_i a_i^T)^{-1}`. Moving one anchor is a
//! rank-one change of the Hessian, so `B` is maintained by Sherman-Morrison
//! and refactorized on a fixed cadence to bound rounding drift.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::glm::GlmProblem;
use crate::linalg::{self, Matrix, Vector};
use crate::problem::FiniteSum;
use crate::sampling::{SubsetSampler, UniformSubsets};

/// Rank-one updates between refactorizations.
pub const DEFAULT_REFACTOR_CADENCE: usize = 1000;

/// Smallest admissible `|n + delta_beta a^T B a|`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// `(H + c u u^T)^{-1}` given `b = H^{-1}`.
pub fn sherman_morrison(b: &Matrix, u: &Vector, c: f64) -> Result<Matrix> {
    if c == 0.0 {
        return Ok(b.clone());
    }
    let bu = b * u;
    let denom = 1.0 + c * u.dot(&bu);
    if denom.abs() < DENOMINATOR_FLOOR {
        return Err(Error::SingularUpdate(denom));
    }
    let mut out = b.clone();
    out.ger(-c / denom, &bu, &bu, 1.0);
    Ok(out)
}

/// Multiply-add counts, used to confirm that steps avoid O(d^3) work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCount {
    /// Multiply-adds spent inside steps.
    pub step_flops: u64,
    pub refactorizations: u64,
}

#[derive(Debug, Clone)]
pub struct GlmFastState<S = UniformSubsets> {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    g: Vector,
    h: Vector,
    b_inv: Matrix,
    x: Vector,
    tau: usize,
    sampler: S,
    k: usize,
    since_refactor: usize,
    cadence: usize,
    ops: OpCount,
    fresh_evals: u64,
    subset: Vec<usize>,
    bu: Vector,
}

impl GlmFastState<UniformSubsets> {
    /// All anchors start at `w0`.
    pub fn new(problem: &GlmProblem, w0: &Vector, tau: usize, seed: u64) -> Result<Self> {
        Self::with_sampler(problem, w0, tau, UniformSubsets::new(seed))
    }
}

impl<S: SubsetSampler> GlmFastState<S> {
    pub fn with_sampler(problem: &GlmProblem, w0: &Vector, tau: usize, sampler: S) -> Result<Self> {
        if !problem.is_per_sample() {
            return Err(invalid("fast path needs one row per component"));
        }
        let n = problem.num_components();
        let d = problem.dim();
        if tau == 0 || tau > n {
            return Err(invalid(alloc::format!("tau = {tau} must lie in [1, {n}]")));
        }
        linalg::ensure_dim(w0, d)?;
        if !linalg::all_finite(w0) {
            return Err(Error::NonFinite);
        }
        let mut alpha = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        let mut gamma = Vec::with_capacity(n);
        for (r, row) in problem.rows().iter().enumerate() {
            let t = row.dot(w0);
            let (_, d1, d2) = problem.row_loss(r, t);
            alpha.push(d1);
            beta.push(d2);
            gamma.push(t);
        }
        let mut state = Self {
            alpha,
            beta,
            gamma,
            g: Vector::zeros(d),
            h: Vector::zeros(d),
            b_inv: Matrix::zeros(d, d),
            x: w0.clone(),
            tau,
            sampler,
            k: 0,
            since_refactor: 0,
            cadence: DEFAULT_REFACTOR_CADENCE,
            ops: OpCount::default(),
            fresh_evals: 0,
            subset: Vec::with_capacity(tau),
            bu: Vector::zeros(d),
        };
        state.rebuild(problem)?;
        state.ops.refactorizations = 0;
        Ok(state)
    }

    /// Sets the number of rank-one updates between refactorizations
    /// (`usize::MAX` disables them).
    pub fn with_cadence(mut self, cadence: usize) -> Self {
        self.cadence = cadence.max(1);
        self
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn g(&self) -> &Vector {
        &self.g
    }

    pub fn h(&self) -> &Vector {
        &self.h
    }

    pub fn inverse(&self) -> &Matrix {
        &self.b_inv
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn ops(&self) -> OpCount {
        self.ops
    }

    pub fn updates_since_refactor(&self) -> usize {
        self.since_refactor
    }

    pub fn last_subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn epochs(&self) -> f64 {
        self.fresh_evals as f64 / self.alpha.len() as f64
    }

    pub fn fresh_evals(&self) -> u64 {
        self.fresh_evals
    }

    /// `lambda I + (1/n) sum beta_i a_i a_i^T` assembled from scratch.
    pub fn assembled_hessian(&self, problem: &GlmProblem) -> Matrix {
        let d = problem.dim();
        let n = self.beta.len() as f64;
        let mut hess = Matrix::identity(d, d) * problem.lambda();
        for (row, &b) in problem.rows().iter().zip(&self.beta) {
            row.outer_add(b / n, &mut hess);
        }
        hess
    }

    fn rebuild(&mut self, problem: &GlmProblem) -> Result<()> {
        let n = self.alpha.len() as f64;
        let d = problem.dim();
        let mut g = Vector::zeros(d);
        let mut h = Vector::zeros(d);
        for (r, row) in problem.rows().iter().enumerate() {
            row.axpy(self.alpha[r] / n, &mut g);
            row.axpy(self.beta[r] * self.gamma[r] / n, &mut h);
        }
        let b_inv = linalg::spd_inverse(&self.assembled_hessian(problem))?;
        self.g = g;
        self.h = h;
        self.b_inv = b_inv;
        self.since_refactor = 0;
        self.ops.refactorizations += 1;
        Ok(())
    }

    /// Rebuilds `B`, `g` and `h` from the per-sample scalars.
    pub fn refactorize(&mut self, problem: &GlmProblem) -> Result<()> {
        self.rebuild(problem)
    }

    /// `max |B H - I|` against a freshly assembled `H`.
    pub fn inverse_residual(&self, problem: &GlmProblem) -> f64 {
        linalg::inverse_residual(&self.b_inv, &self.assembled_hessian(problem))
    }

    /// Refactorizes when the inverse residual exceeds `threshold`; returns
    /// whether it did. Costs one dense assembly and product.
    pub fn repair_if_drifted(&mut self, problem: &GlmProblem, threshold: f64) -> Result<bool> {
        if self.inverse_residual(problem) > threshold {
            self.rebuild(problem)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Relative deviation of `g` and `h` from fresh recomputation.
    pub fn aggregate_drift(&self, problem: &GlmProblem) -> f64 {
        let n = self.alpha.len() as f64;
        let d = problem.dim();
        let mut g = Vector::zeros(d);
        let mut h = Vector::zeros(d);
        for (r, row) in problem.rows().iter().enumerate() {
            row.axpy(self.alpha[r] / n, &mut g);
            row.axpy(self.beta[r] * self.gamma[r] / n, &mut h);
        }
        let dg = (&self.g - &g).norm() / g.norm().max(f64::MIN_POSITIVE);
        let dh = (&self.h - &h).norm() / h.norm().max(f64::MIN_POSITIVE);
        dg.max(dh)
    }

    /// `x^{k+1} = B (h - g)`.
    pub fn next_iterate(&self) -> Vector {
        &self.b_inv * (&self.h - &self.g)
    }

    pub fn step(&mut self, problem: &GlmProblem) -> Result<Vector> {
        let n = self.alpha.len();
        let d = self.x.len() as u64;
        let x_next = self.next_iterate();
        self.ops.step_flops += d * d;
        let mut subset = core::mem::take(&mut self.subset);
        self.sampler.draw(n, self.tau, self.k, &mut subset);
        for &i in &subset {
            self.update_sample(problem, i, &x_next)?;
        }
        self.subset = subset;
        self.fresh_evals += self.tau as u64;
        self.k += 1;
        self.x = x_next.clone();
        Ok(x_next)
    }

    fn update_sample(&mut self, problem: &GlmProblem, i: usize, x_next: &Vector) -> Result<()> {
        let n = self.alpha.len() as f64;
        let d = self.x.len() as u64;
        let row = &problem.rows()[i];
        let nnz = row.nnz() as u64;
        let t = row.dot(x_next);
        let (_, a_new, b_new) = problem.row_loss(i, t);
        let a_old = self.alpha[i];
        let b_old = self.beta[i];
        let bg_old = b_old * self.gamma[i];
        self.alpha[i] = a_new;
        self.beta[i] = b_new;
        self.gamma[i] = t;
        row.axpy((a_new - a_old) / n, &mut self.g);
        row.axpy((b_new * t - bg_old) / n, &mut self.h);
        self.ops.step_flops += 3 * nnz;

        let delta = b_new - b_old;
        if delta != 0.0 {
            // bu = B a_i using only the nonzero columns.
            self.bu.fill(0.0);
            for (&j, &v) in row.indices.iter().zip(&row.values) {
                self.bu.axpy(v, &self.b_inv.column(j), 1.0);
            }
            let quad = row.dot(&self.bu);
            let denom = n + delta * quad;
            self.ops.step_flops += d * nnz + nnz;
            if denom.abs() < DENOMINATOR_FLOOR {
                return self.rebuild(problem);
            }
            self.b_inv.ger(-delta / denom, &self.bu, &self.bu, 1.0);
            self.ops.step_flops += d * d;
        }
        self.since_refactor += 1;
        if self.since_refactor >= self.cadence {
            self.rebuild(problem)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{Loss, SparseDataset};
    use alloc::vec;

    fn two_point() -> GlmProblem {
        let data =
            SparseDataset::new(vec![vec![(1, 1.0)], vec![(1, 2.0)]], vec![1.0, -1.0], None).unwrap();
        GlmProblem::new(&data, Loss::Logistic, 0.1).unwrap()
    }

    #[test]
    fn scalar_instance_init_and_step() {
        let p = two_point();
        let mut s = GlmFastState::new(&p, &Vector::zeros(1), 1, 0).unwrap();
        assert_eq!(s.alpha(), &[-0.5, 0.5]);
        assert!((s.g()[0] - 0.25).abs() < 1e-15);
        assert_eq!(s.h()[0], 0.0);
        assert!((s.inverse()[(0, 0)] - 1.0 / 0.725).abs() < 1e-14);
        let x = s.step(&p).unwrap();
        assert!((x[0] + 0.25 / 0.725).abs() < 1e-14);
        assert!((x[0] + 0.344828).abs() < 1e-6);
    }

    #[test]
    fn sherman_morrison_examples() {
        let b = Matrix::identity(2, 2);
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let r = sherman_morrison(&b, &e1, 1.0).unwrap();
        assert!((r - Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 1.0]))).amax() < 1e-16);
        let r = sherman_morrison(&b, &e1, 2.0).unwrap();
        let direct = linalg::spd_inverse(&Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]))).unwrap();
        assert!((r - direct).amax() < 1e-15);
        assert_eq!(sherman_morrison(&b, &e1, 0.0).unwrap(), b);
        assert!(matches!(sherman_morrison(&b, &e1, -1.0), Err(Error::SingularUpdate(_))));
    }

    #[test]
    fn rejects_blocked_problems_and_singular_hessian() {
        let data = crate::glm::synth_logistic_dataset(1, 6, 2).unwrap();
        let blocked = crate::glm::partition(&data, 3, Loss::Logistic, 0.1, None).unwrap();
        assert!(GlmFastState::new(&blocked, &Vector::zeros(2), 1, 0).is_err());
        // lambda = 0 and a single feature direction: rank-deficient Hessian.
        let flat = SparseDataset::new(vec![vec![(1, 1.0)], vec![(1, 1.0)]], vec![1.0, -1.0], Some(2))
            .unwrap();
        let p = GlmProblem::new(&flat, Loss::Logistic, 0.0).unwrap();
        assert!(matches!(
            GlmFastState::new(&p, &Vector::zeros(2), 1, 0),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn ridge_dominated_inverse() {
        let data = crate::glm::synth_logistic_dataset(2, 10, 3).unwrap();
        let p = GlmProblem::new(&data, Loss::Logistic, 1e6).unwrap();
        let s = GlmFastState::new(&p, &Vector::zeros(3), 1, 0).unwrap();
        let scaled = s.inverse() * 1e6;
        assert!((scaled - Matrix::identity(3, 3)).amax() < 1e-5);
    }
}
