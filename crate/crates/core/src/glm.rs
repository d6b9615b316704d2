//! Sparse datasets and l2-regularized generalized linear models.
//!
//! A [`GlmProblem`] groups dataset rows into contiguous blocks; component
//! `i` is the mean loss over its block plus `lambda/2 ||x||^2`. With one row
//! per block this is the per-sample form `f_i(x) = phi_i(a_i^T x) +
//! lambda/2 ||x||^2` used by the fast path in [`crate::glm_fast`].

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::math;
use crate::problem::{ComponentEval, FiniteSum};

/// `sup_t |phi'''(t)|` for the logistic loss, attained at `s(1-s)(1-2s)`
/// with `s = 1/2 - sqrt(3)/6`.
pub const LOGISTIC_THIRD_DERIVATIVE_BOUND: f64 = 0.096_225_044_864_937_63;

/// Scalar loss family `phi(t; b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `log(1 + exp(-b t))`, labels in `{-1, +1}`.
    Logistic,
    /// `(t - b)^2 / 2`.
    Squared,
}

impl Loss {
    /// `(phi, phi', phi'')` at `t`.
    #[inline]
    pub fn eval(self, t: f64, b: f64) -> (f64, f64, f64) {
        match self {
            Loss::Logistic => logistic_scalar(t, b),
            Loss::Squared => {
                let r = t - b;
                (0.5 * r * r, r, 1.0)
            }
        }
    }

    /// Upper bound on `|phi'''|`.
    pub fn third_derivative_bound(self) -> f64 {
        match self {
            Loss::Logistic => LOGISTIC_THIRD_DERIVATIVE_BOUND,
            Loss::Squared => 0.0,
        }
    }
}

/// Logistic loss `log(1 + exp(-b t))` with its first two derivatives in `t`.
///
/// Both sigmoids are formed from `exp(-|bt|)` so nothing overflows and
/// `phi'' = s (1 - s)` never cancels.
pub fn logistic_scalar(t: f64, b: f64) -> (f64, f64, f64) {
    let z = b * t;
    let e = math::exp(-math::abs(z));
    let (sig_pos, sig_neg) = if z >= 0.0 {
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        (e / (1.0 + e), 1.0 / (1.0 + e))
    };
    let phi = if z > 0.0 { math::ln_1p(e) } else { -z + math::ln_1p(e) };
    (phi, -b * sig_neg, sig_pos * sig_neg)
}

/// Parsed LIBSVM-style dataset. Feature indices are 1-based, as in the
/// text format.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
    dim: usize,
}

impl SparseDataset {
    /// Validates and wraps rows. `dim` overrides the dimension, which
    /// otherwise is the largest index seen.
    pub fn new(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, dim: Option<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(invalid("one label per row required"));
        }
        let mut max_index = 0;
        for (r, row) in rows.iter().enumerate() {
            let mut prev = 0;
            for &(idx, val) in row {
                if idx == 0 {
                    return Err(invalid(format!("row {r}: feature index must be >= 1")));
                }
                if idx <= prev {
                    return Err(invalid(format!("row {r}: indices not strictly increasing")));
                }
                if !val.is_finite() {
                    return Err(Error::NonFinite);
                }
                prev = idx;
            }
            max_index = max_index.max(prev);
        }
        if labels.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dim = match dim {
            Some(d) if d < max_index => {
                return Err(invalid(format!(
                    "dimension override {d} is below the largest index {max_index}"
                )))
            }
            Some(d) => d,
            None => max_index,
        };
        Ok(Self { rows, labels, dim })
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Sparse feature vector with 0-based, strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    #[inline]
    pub fn dot(&self, x: &Vector) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// `out += scale * a`.
    #[inline]
    pub fn axpy(&self, scale: f64, out: &mut Vector) {
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] += scale * v;
        }
    }

    /// `out += scale * a a^T`.
    pub fn outer_add(&self, scale: f64, out: &mut Matrix) {
        for (&j, &vj) in self.indices.iter().zip(&self.values) {
            for (&k, &vk) in self.indices.iter().zip(&self.values) {
                out[(j, k)] += scale * vj * vk;
            }
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn to_dense(&self, d: usize) -> Vector {
        let mut out = Vector::zeros(d);
        self.axpy(1.0, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmProblem {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    loss: Loss,
    lambda: f64,
    dim: usize,
    blocks: Vec<Range<usize>>,
}

impl GlmProblem {
    /// One component per dataset row.
    pub fn new(dataset: &SparseDataset, loss: Loss, lambda: f64) -> Result<Self> {
        let rows = dataset.len();
        partition(dataset, rows, loss, lambda, None)
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Row range of component `i`.
    pub fn block(&self, i: usize) -> Range<usize> {
        self.blocks[i].clone()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    /// True when every component owns exactly one row.
    pub fn is_per_sample(&self) -> bool {
        self.blocks.len() == self.rows.len()
    }

    /// `(phi, phi', phi'')` of row `r` at `t`.
    #[inline]
    pub fn row_loss(&self, r: usize, t: f64) -> (f64, f64, f64) {
        self.loss.eval(t, self.labels[r])
    }

    /// Certified bound on the Hessian Lipschitz constant of every component:
    /// `sup|phi'''| * max_i mean_{r in block i} ||a_r||^3`.
    pub fn certified_hess_lip(&self) -> f64 {
        let bound = self.loss.third_derivative_bound();
        self.blocks
            .iter()
            .map(|b| {
                let total: f64 = self.rows[b.clone()]
                    .iter()
                    .map(|row| {
                        let nrm = math::sqrt(row.norm_squared());
                        nrm * nrm * nrm
                    })
                    .sum();
                total / b.len() as f64
            })
            .fold(0.0, f64::max)
            * bound
    }
}

impl FiniteSum for GlmProblem {
    fn num_components(&self) -> usize {
        self.blocks.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let block = self.block(i);
        let m = block.len() as f64;
        let loss: f64 = block
            .map(|r| self.row_loss(r, self.rows[r].dot(x)).0)
            .sum();
        loss / m + 0.5 * self.lambda * x.norm_squared()
    }

    fn gradient(&self, i: usize, x: &Vector) -> Vector {
        let block = self.block(i);
        let m = block.len() as f64;
        let mut g = x * self.lambda;
        for r in block {
            let (_, dphi, _) = self.row_loss(r, self.rows[r].dot(x));
            self.rows[r].axpy(dphi / m, &mut g);
        }
        g
    }

    fn hessian(&self, i: usize, x: &Vector) -> Matrix {
        let block = self.block(i);
        let m = block.len() as f64;
        let mut h = Matrix::identity(self.dim, self.dim) * self.lambda;
        for r in block {
            let (_, _, ddphi) = self.row_loss(r, self.rows[r].dot(x));
            self.rows[r].outer_add(ddphi / m, &mut h);
        }
        h
    }

    fn eval(&self, i: usize, x: &Vector) -> ComponentEval {
        let block = self.block(i);
        let m = block.len() as f64;
        let mut value = 0.0;
        let mut gradient = x * self.lambda;
        let mut hessian = Matrix::identity(self.dim, self.dim) * self.lambda;
        for r in block {
            let (phi, dphi, ddphi) = self.row_loss(r, self.rows[r].dot(x));
            value += phi;
            self.rows[r].axpy(dphi / m, &mut gradient);
            self.rows[r].outer_add(ddphi / m, &mut hessian);
        }
        ComponentEval {
            value: value / m + 0.5 * self.lambda * x.norm_squared(),
            gradient,
            hessian,
        }
    }

    fn strong_convexity(&self) -> f64 {
        self.lambda
    }

    fn hessian_lipschitz(&self) -> f64 {
        self.certified_hess_lip()
    }
}

/// Splits a dataset into `parts` contiguous blocks whose sizes differ by at
/// most one (earlier blocks take the remainder). With `shuffle = Some(seed)`
/// rows are permuted by a seeded Fisher-Yates shuffle first.
pub fn partition(
    dataset: &SparseDataset,
    parts: usize,
    loss: Loss,
    lambda: f64,
    shuffle: Option<u64>,
) -> Result<GlmProblem> {
    let total = dataset.len();
    if parts == 0 {
        return Err(invalid("parts must be positive"));
    }
    if parts > total {
        return Err(invalid(format!("cannot split {total} rows into {parts} parts")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be a finite nonnegative number"));
    }
    if loss == Loss::Logistic && dataset.labels().iter().any(|&b| b != 1.0 && b != -1.0) {
        return Err(invalid("logistic loss requires labels in {-1, +1}"));
    }
    if dataset.dim() == 0 {
        return Err(invalid("dataset has no features"));
    }

    let mut order: Vec<usize> = (0..total).collect();
    if let Some(seed) = shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in (1..total).rev() {
            let k = rng.random_range(0..=j);
            order.swap(j, k);
        }
    }

    let rows = order
        .iter()
        .map(|&r| {
            let (indices, values) = dataset.rows()[r].iter().map(|&(j, v)| (j - 1, v)).unzip();
            SparseRow { indices, values }
        })
        .collect();
    let labels = order.iter().map(|&r| dataset.labels()[r]).collect();

    let base = total / parts;
    let extra = total % parts;
    let mut blocks = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        blocks.push(start..start + len);
        start += len;
    }

    Ok(GlmProblem {
        rows,
        labels,
        loss,
        lambda,
        dim: dataset.dim(),
        blocks,
    })
}

/// Deterministic dense dataset for small logistic fixtures.
///
/// Generator: a `ChaCha8Rng` seeded with `seed_from_u64(seed)` produces, row
/// by row, `d` features `2u - 1` followed by a label that is `-1` when
/// `u < 0.5` and `+1` otherwise, where each `u` is one standard uniform `f64`
/// draw (`(next_u64 >> 11) * 2^-53`). Every feature index `1..=d` is stored.
pub fn synth_logistic_dataset(seed: u64, n: usize, d: usize) -> Result<SparseDataset> {
    if n == 0 || d == 0 {
        return Err(invalid("n and d must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<(usize, f64)> = (1..=d)
            .map(|j| (j, 2.0 * rng.random::<f64>() - 1.0))
            .collect();
        rows.push(row);
        labels.push(if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 });
    }
    SparseDataset::new(rows, labels, Some(d))
}

/// Per-sample logistic problem over [`synth_logistic_dataset`].
pub fn synth_logistic(seed: u64, n: usize, d: usize, lambda: f64) -> Result<GlmProblem> {
    let data = synth_logistic_dataset(seed, n, d)?;
    GlmProblem::new(&data, Loss::Logistic, lambda)
}
