//! Cubic-regularized subproblems
//!
//! ```text
//! min_x  c + g^T x + 1/2 x^T H x + (M / 6n) sum_i ||x - w_i||^3
//! ```
//!
//! in three regimes: the closed-form prox of a single cube term, the
//! single-anchor problem (secular equation in `r = ||x - w||`), and the
//! multi-anchor problem in either the Euclidean norm or the aggregated l3
//! form that only needs `sum w_i` and `sum w_i^2`.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix, SolvePolicy, Vector};
use crate::math;

/// Which norm the cube penalty uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    #[default]
    L2,
    L3,
}

/// Running sums that describe the aggregated l3 penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSums {
    /// `sum_i w_i`
    pub sum_w: Vector,
    /// `sum_i w_i^2` (coordinatewise squares)
    pub sum_w2: Vector,
    /// `sum_i ||w_i||_3^3`
    pub sum_cube: f64,
    pub n: usize,
}

fn cube_norm3(w: &Vector) -> f64 {
    w.iter().map(|v| v.abs() * v * v).sum()
}

impl CubeSums {
    pub fn from_anchors(anchors: &[Vector]) -> Self {
        let d = anchors.first().map_or(0, |a| a.len());
        let mut sums = Self {
            sum_w: Vector::zeros(d),
            sum_w2: Vector::zeros(d),
            sum_cube: 0.0,
            n: 0,
        };
        for w in anchors {
            sums.add(w);
        }
        sums
    }

    pub fn add(&mut self, w: &Vector) {
        self.sum_w += w;
        self.sum_w2 += w.component_mul(w);
        self.sum_cube += cube_norm3(w);
        self.n += 1;
    }

    pub fn remove(&mut self, w: &Vector) {
        self.sum_w -= w;
        self.sum_w2 -= w.component_mul(w);
        self.sum_cube -= cube_norm3(w);
        self.n -= 1;
    }

    /// The aggregated l3 expression is convex in every coordinate exactly
    /// when no mean anchor coordinate is positive.
    pub fn penalty_is_convex(&self) -> bool {
        self.sum_w.iter().all(|&s| s <= 0.0)
    }

    /// Largest absolute deviation from sums rebuilt from `anchors`.
    pub fn deviation(&self, anchors: &[Vector]) -> f64 {
        let fresh = Self::from_anchors(anchors);
        (&self.sum_w - &fresh.sum_w)
            .amax()
            .max((&self.sum_w2 - &fresh.sum_w2).amax())
            .max((self.sum_cube - fresh.sum_cube).abs())
    }
}

/// Anchor information available to the subproblem.
#[derive(Debug, Clone, Copy)]
pub enum AnchorSet<'a> {
    Explicit(&'a [Vector]),
    Sums(&'a CubeSums),
}

impl AnchorSet<'_> {
    pub fn len(&self) -> usize {
        match self {
            AnchorSet::Explicit(a) => a.len(),
            AnchorSet::Sums(s) => s.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct CubicModel<'a> {
    pub g: Vector,
    pub h: Matrix,
    pub anchors: AnchorSet<'a>,
    pub m: f64,
    pub constant: f64,
}

impl<'a> CubicModel<'a> {
    pub fn new(g: Vector, h: Matrix, anchors: AnchorSet<'a>, m: f64) -> Result<Self> {
        let d = g.len();
        if h.nrows() != d || h.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: h.nrows(),
            });
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(invalid("M must be positive"));
        }
        if anchors.is_empty() {
            return Err(invalid("at least one anchor required"));
        }
        match anchors {
            AnchorSet::Explicit(list) => {
                for w in list {
                    linalg::ensure_dim(w, d)?;
                }
            }
            AnchorSet::Sums(s) => {
                linalg::ensure_dim(&s.sum_w, d)?;
                linalg::ensure_dim(&s.sum_w2, d)?;
            }
        }
        if (&h - h.transpose()).amax() > 1e-12 * h.amax().max(1.0) {
            return Err(invalid("H must be symmetric"));
        }
        Ok(Self {
            g,
            h,
            anchors,
            m,
            constant: 0.0,
        })
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    fn smooth_value(&self, x: &Vector) -> f64 {
        self.constant + self.g.dot(x) + 0.5 * x.dot(&(&self.h * x))
    }

    fn smooth_gradient(&self, x: &Vector) -> Vector {
        &self.g + &self.h * x
    }

    fn sums(&self) -> CubeSums {
        match self.anchors {
            AnchorSet::Explicit(list) => CubeSums::from_anchors(list),
            AnchorSet::Sums(s) => s.clone(),
        }
    }

    /// Objective value under `mode`. The l2 mode needs explicit anchors.
    pub fn objective(&self, x: &Vector, mode: NormMode) -> Result<f64> {
        let penalty = match (mode, self.anchors) {
            (NormMode::L2, AnchorSet::Explicit(list)) => l2_penalty_eval(x, list, self.m).0,
            (NormMode::L2, AnchorSet::Sums(_)) => {
                return Err(invalid("l2 penalty needs explicit anchors"))
            }
            (NormMode::L3, AnchorSet::Sums(s)) => l3_penalty_eval(x, s, self.m).0,
            (NormMode::L3, AnchorSet::Explicit(_)) => l3_penalty_eval(x, &self.sums(), self.m).0,
        };
        Ok(self.smooth_value(x) + penalty)
    }
}

/// `(M / 6n) sum ||x - w_i||^3` and its gradient `(M / 2n) sum ||u|| u`.
pub fn l2_penalty_eval(x: &Vector, anchors: &[Vector], m: f64) -> (f64, Vector) {
    let n = anchors.len() as f64;
    let mut value = 0.0;
    let mut grad = Vector::zeros(x.len());
    for w in anchors {
        let u = x - w;
        let r = u.norm();
        value += r * r * r;
        grad.axpy(r, &u, 1.0);
    }
    (m / (6.0 * n) * value, grad * (m / (2.0 * n)))
}

/// Aggregated l3 penalty
///
/// ```text
/// (M/6) [ ||x||_3^3 - 3 <x^2, mean w> + 3 <x, mean w^2> - mean ||w||_3^3 ]
/// ```
///
/// with gradient `(M/6) (3 sign(x) x^2 - 6 x mean w + 3 mean w^2)`. This
/// equals `(M/6n) sum_i ||x - w_i||_3^3` only on coordinates where
/// `x_j >= w_ij >= 0` for every anchor; elsewhere it is a different,
/// possibly nonconvex, function.
pub fn l3_penalty_eval(x: &Vector, sums: &CubeSums, m: f64) -> (f64, Vector) {
    let n = sums.n as f64;
    let mut value = -sums.sum_cube / n;
    let mut grad = Vector::zeros(x.len());
    for j in 0..x.len() {
        let a = sums.sum_w[j] / n;
        let b = sums.sum_w2[j] / n;
        let z = x[j];
        value += z.abs() * z * z - 3.0 * z * z * a + 3.0 * z * b;
        grad[j] = 3.0 * z.abs() * z - 6.0 * z * a + 3.0 * b;
    }
    (m / 6.0 * value, grad * (m / 6.0))
}

/// Closed-form `argmin_x sigma ||x - w||^3 + 1/2 ||x - v||^2`.
///
/// The minimizer lies on the segment from `w` to `v` at distance `s` from
/// `w`, where `3 sigma s^2 + s = ||v - w||`.
pub fn prox_cubic(v: &Vector, w: &Vector, sigma: f64) -> Vector {
    let diff = v - w;
    let r = diff.norm();
    if r == 0.0 {
        return w.clone();
    }
    let s = 2.0 * r / (1.0 + math::sqrt(1.0 + 12.0 * sigma * r));
    w + diff * (s / r)
}

/// Minimizes `g^T x + 1/2 x^T H x + (M/6) ||x - w||^3` for symmetric PSD
/// `H` by the secular method.
///
/// With `y = x - w` and `gt = g + H w`, the minimizer is
/// `y = -(H + (M/2) r I)^{-1} gt` where `r = ||y||` is the unique root of
/// the decreasing function `r -> ||(H + (M/2) r I)^{-1} gt|| - r`. The root
/// is found in the eigenbasis of `H` by Newton iteration safeguarded with
/// bisection.
pub fn solve_single_anchor(g: &Vector, h: &Matrix, w: &Vector, m: f64, tol: f64) -> Result<Vector> {
    let d = g.len();
    linalg::ensure_dim(w, d)?;
    if !(m > 0.0) || !(tol > 0.0) {
        return Err(invalid("M and tol must be positive"));
    }
    let gt = g + h * w;
    let gt_norm = gt.norm();
    if gt_norm == 0.0 {
        return Ok(w.clone());
    }
    let eig = h.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let lam_min = eig.eigenvalues.min();
    if lam_min < -1e-10 * scale {
        return Err(invalid("H must be positive semidefinite"));
    }
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let c = eig.eigenvectors.tr_mul(&gt);
    let half_m = 0.5 * m;

    let step_norm = |r: f64| -> (f64, f64) {
        // (||s(r)||, sum c^2 / (lam + m r / 2)^3)
        let mut sq = 0.0;
        let mut cube = 0.0;
        for (cj, lj) in c.iter().zip(&lam) {
            let den = lj + half_m * r;
            let t = cj / den;
            sq += t * t;
            cube += t * t / den;
        }
        (math::sqrt(sq), cube)
    };

    let mut hi = math::sqrt(2.0 * gt_norm / m);
    if lam_min > 0.0 {
        hi = hi.min(step_norm(0.0).0);
    }
    let mut lo = 0.0;
    let target = 0.25 * tol * (1.0 + gt_norm);
    let mut r = if step_norm(0.0).0.is_finite() { 0.0 } else { 0.5 * hi };
    let mut converged = false;
    for _ in 0..200 {
        let (ns, cube) = step_norm(r);
        if !ns.is_finite() {
            lo = r;
            r = 0.5 * (lo + hi);
            continue;
        }
        let phi = ns - r;
        if half_m * phi.abs() * ns <= target || hi - lo <= 4.0 * f64::EPSILON * hi {
            converged = true;
            break;
        }
        if phi > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let dphi = -half_m * cube / ns - 1.0;
        let newton = r - phi / dphi;
        r = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }

    let coeffs = Vector::from_fn(d, |j, _| -c[j] / (lam[j] + half_m * r));
    let y = &eig.eigenvectors * coeffs;
    let residual = (&gt + h * &y + &y * (half_m * y.norm())).norm();
    if !converged || residual > tol * (1.0 + gt_norm) {
        return Err(Error::NoConvergence {
            what: "secular equation",
            iterations: 200,
            residual,
        });
    }
    Ok(w + y)
}

/// Inner-solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x: Vector,
    /// Stationarity residual at `x` (gradient norm in l2 mode, scaled
    /// prox-gradient step in l3 mode).
    pub residual: f64,
    pub iterations: usize,
}

/// Power-iteration rounds and safety factor for the prox-gradient step.
const POWER_ROUNDS: usize = 20;
const STEP_SAFETY: f64 = 1.05;

/// Minimizes a multi-anchor cubic model.
///
/// * `L2`: the objective is twice continuously differentiable and convex,
///   so it is minimized by Newton's method with Armijo backtracking, started
///   from the best anchor.
/// * `L3`: proximal gradient on the smooth part with step `1/L`,
///   `L = 1.05 * lambda_max(H)`, and the exact coordinatewise prox of the
///   aggregated penalty.
///
/// Both stop when the residual is at most `tol * (1 + ||g||)`.
pub fn solve_multi_anchor(model: &CubicModel<'_>, mode: NormMode, opts: InnerOptions) -> Result<InnerSolution> {
    match mode {
        NormMode::L2 => match model.anchors {
            AnchorSet::Explicit(anchors) => solve_l2_newton(model, anchors, opts),
            AnchorSet::Sums(_) => Err(invalid("l2 mode needs explicit anchors")),
        },
        NormMode::L3 => solve_l3_prox_gradient(model, opts),
    }
}

fn l2_hessian(model: &CubicModel<'_>, anchors: &[Vector], x: &Vector) -> Matrix {
    let d = x.len();
    let coef = model.m / (2.0 * anchors.len() as f64);
    let mut hess = model.h.clone();
    for w in anchors {
        let u = x - w;
        let r = u.norm();
        if r == 0.0 {
            continue;
        }
        for j in 0..d {
            hess[(j, j)] += coef * r;
        }
        hess.ger(coef / r, &u, &u, 1.0);
    }
    hess
}

fn solve_l2_newton(model: &CubicModel<'_>, anchors: &[Vector], opts: InnerOptions) -> Result<InnerSolution> {
    let objective = |x: &Vector| model.smooth_value(x) + l2_penalty_eval(x, anchors, model.m).0;
    let gradient = |x: &Vector| model.smooth_gradient(x) + l2_penalty_eval(x, anchors, model.m).1;
    let threshold = opts.tol * (1.0 + model.g.norm());

    let mut x = anchors
        .iter()
        .map(|w| (objective(w), w))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, w)| w.clone())
        .expect("anchors are nonempty");
    let mut fx = objective(&x);
    let mut grad = gradient(&x);
    let mut residual = grad.norm();

    for it in 0..opts.max_iter {
        if residual <= threshold {
            return Ok(InnerSolution {
                x,
                residual,
                iterations: it,
            });
        }
        let hess = l2_hessian(model, anchors, &x);
        let mut dir = match linalg::spd_solve(&hess, &grad, SolvePolicy::Jitter) {
            Ok(p) if linalg::all_finite(&p) => -p,
            _ => -grad.clone(),
        };
        let mut slope = grad.dot(&dir);
        if !(slope < 0.0) {
            dir = -grad.clone();
            slope = -residual * residual;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = &x + &dir * t;
            let ft = objective(&trial);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            // Near the optimum f differences drown in rounding; accept a
            // full step that reduces the gradient without raising f.
            if t == 1.0 && ft <= fx + 4.0 * f64::EPSILON * fx.abs().max(1.0) {
                let gt = gradient(&trial);
                if gt.norm() < residual {
                    accepted = Some((trial, ft.min(fx)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            return Err(Error::NoConvergence {
                what: "cubic subproblem (l2)",
                iterations: it,
                residual,
            });
        };
        x = next;
        fx = f_next;
        grad = gradient(&x);
        residual = grad.norm();
    }
    if residual <= threshold {
        return Ok(InnerSolution {
            x,
            residual,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NoConvergence {
        what: "cubic subproblem (l2)",
        iterations: opts.max_iter,
        residual,
    })
}

/// Exact minimizer over `z` of
/// `(M/6)(|z|^3 - 3 z^2 a + 3 z b) + (L/2)(z - v)^2`.
///
/// Each sign branch has a quadratic stationarity condition; the global
/// minimizer is the best of their admissible roots and `z = 0`.
pub fn l3_coordinate_prox(v: f64, a: f64, b: f64, m: f64, l: f64) -> f64 {
    let q = |z: f64| m / 6.0 * (z.abs() * z * z - 3.0 * z * z * a + 3.0 * z * b) + 0.5 * l * (z - v) * (z - v);
    let lin = l - m * a;
    let cst = 0.5 * m * b - l * v;
    let mut best = 0.0;
    let mut best_val = q(0.0);
    let mut consider = |z: f64| {
        let val = q(z);
        if val < best_val {
            best = z;
            best_val = val;
        }
    };
    // z >= 0:  (M/2) z^2 + lin z + cst = 0
    for z in quadratic_roots(0.5 * m, lin, cst).into_iter().flatten() {
        if z >= 0.0 {
            consider(z);
        }
    }
    // z <= 0: -(M/2) z^2 + lin z + cst = 0
    for z in quadratic_roots(-0.5 * m, lin, cst).into_iter().flatten() {
        if z <= 0.0 {
            consider(z);
        }
    }
    best
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a == 0.0 {
        return [(b != 0.0).then(|| -c / b), None];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let sq = math::sqrt(disc);
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    if q == 0.0 {
        return [Some(0.0), None];
    }
    [Some(q / a), Some(c / q)]
}

fn l3_prox(v: &Vector, sums: &CubeSums, m: f64, l: f64) -> Vector {
    let n = sums.n as f64;
    Vector::from_fn(v.len(), |j, _| {
        l3_coordinate_prox(v[j], sums.sum_w[j] / n, sums.sum_w2[j] / n, m, l)
    })
}

fn solve_l3_prox_gradient(model: &CubicModel<'_>, opts: InnerOptions) -> Result<InnerSolution> {
    let sums = model.sums();
    let objective = |x: &Vector| model.smooth_value(x) + l3_penalty_eval(x, &sums, model.m).0;
    let threshold = opts.tol * (1.0 + model.g.norm());
    let mut l = (STEP_SAFETY * linalg::power_lambda_max(&model.h, POWER_ROUNDS)).max(1e-12);

    let mut x = match model.anchors {
        AnchorSet::Explicit(list) => list
            .iter()
            .map(|w| (objective(w), w))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, w)| w.clone())
            .expect("anchors are nonempty"),
        AnchorSet::Sums(s) => &s.sum_w / s.n as f64,
    };
    let mut fx = objective(&x);
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let v = &x - model.smooth_gradient(&x) / l;
        let next = l3_prox(&v, &sums, model.m, l);
        let f_next = objective(&next);
        if f_next > fx + 4.0 * f64::EPSILON * fx.abs().max(1.0) {
            // power iteration underestimated the curvature
            l *= 2.0;
            continue;
        }
        residual = l * (&next - &x).norm();
        x = next;
        fx = f_next;
        if residual <= threshold {
            return Ok(InnerSolution {
                x,
                residual,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "cubic subproblem (l3)",
        iterations: opts.max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn prox_at_kink_and_known_root() {
        let w = v(&[0.3, -1.0]);
        assert_eq!(prox_cubic(&w, &w, 2.0), w);
        let x = prox_cubic(&v(&[2.0, 0.0]), &v(&[0.0, 0.0]), 1.0 / 3.0);
        assert!((x - v(&[1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn single_anchor_scalar_root() {
        let y = solve_single_anchor(&v(&[1.0]), &Matrix::identity(1, 1), &v(&[0.0]), 6.0, 1e-12).unwrap();
        assert!((y[0] - (1.0 - 13f64.sqrt()) / 6.0).abs() < 1e-12);
        assert!((y[0] + 0.434259).abs() < 1e-6);
    }

    #[test]
    fn single_anchor_zero_gradient() {
        let w = v(&[1.0, 2.0]);
        let h = Matrix::identity(2, 2);
        let g = -(&h * &w);
        assert_eq!(solve_single_anchor(&g, &h, &w, 3.0, 1e-10).unwrap(), w);
    }

    #[test]
    fn single_anchor_vanishing_regularization_is_newton() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = v(&[1.0, -1.0]);
        let w = v(&[0.0, 0.0]);
        let x = solve_single_anchor(&g, &h, &w, 1e-8, 1e-12).unwrap();
        let newton = -h.clone().cholesky().unwrap().solve(&g);
        assert!((x - newton).norm() < 1e-6);
    }

    #[test]
    fn single_anchor_with_singular_hessian() {
        let h = Matrix::zeros(2, 2);
        let g = v(&[3.0, 4.0]);
        let x = solve_single_anchor(&g, &h, &v(&[0.0, 0.0]), 2.0, 1e-12).unwrap();
        // g + ||x|| x = 0  =>  ||x||^2 = ||g|| = 5
        assert!((x.norm_squared() - 5.0).abs() < 1e-10);
        assert!(solve_single_anchor(&g, &(-Matrix::identity(2, 2)), &v(&[0.0, 0.0]), 2.0, 1e-12).is_err());
    }

    #[test]
    fn l3_penalty_example() {
        let sums = CubeSums::from_anchors(&[v(&[0.0, 0.0])]);
        let (val, grad) = l3_penalty_eval(&v(&[1.0, -2.0]), &sums, 6.0);
        assert!((val - 9.0).abs() < 1e-14);
        assert!((grad - v(&[3.0, -12.0])).norm() < 1e-14);
        let w = v(&[0.7, 0.2]);
        let sums = CubeSums::from_anchors(&[w.clone()]);
        let (val, grad) = l3_penalty_eval(&w, &sums, 6.0);
        assert!(val.abs() < 1e-15);
        assert!(grad.norm() < 1e-15);
    }

    #[test]
    fn l3_identity_differs_when_signs_mix() {
        // x = 0, w = 1: |x - w|^3 = 1 but the aggregated form gives -1.
        let sums = CubeSums::from_anchors(&[v(&[1.0])]);
        let (val, _) = l3_penalty_eval(&v(&[0.0]), &sums, 6.0);
        assert_eq!(val, -1.0);
        assert!(!sums.penalty_is_convex());
        assert!(CubeSums::from_anchors(&[v(&[-1.0])]).penalty_is_convex());
    }

    #[test]
    fn coordinate_prox_matches_scan() {
        let cases = [
            (0.3, 0.5, 0.4, 2.0, 1.0),
            (-1.0, 0.2, 0.1, 6.0, 0.5),
            (2.0, -0.3, 0.2, 1.0, 3.0),
            (0.0, 1.0, 1.5, 4.0, 0.2),
        ];
        for &(vv, a, b, m, l) in &cases {
            let z = l3_coordinate_prox(vv, a, b, m, l);
            let q = |z: f64| m / 6.0 * (z.abs() * z * z - 3.0 * z * z * a + 3.0 * z * b) + 0.5 * l * (z - vv) * (z - vv);
            let mut best = f64::INFINITY;
            for k in -400_000..=400_000 {
                best = best.min(q(k as f64 * 1e-5));
            }
            assert!(q(z) <= best + 1e-9, "case {:?}: {} vs {}", (vv, a, b, m, l), q(z), best);
        }
    }

    #[test]
    fn symmetric_two_anchor_problem() {
        let anchors = vec![v(&[-1.0]), v(&[1.0])];
        let model = CubicModel::new(v(&[0.0]), Matrix::identity(1, 1), AnchorSet::Explicit(&anchors), 6.0).unwrap();
        let sol = solve_multi_anchor(&model, NormMode::L2, InnerOptions::default()).unwrap();
        assert!(sol.x[0].abs() <= 1e-9);
    }

    #[test]
    fn model_validation() {
        let anchors = vec![v(&[0.0])];
        assert!(CubicModel::new(v(&[0.0]), Matrix::identity(1, 1), AnchorSet::Explicit(&anchors), 0.0).is_err());
        assert!(CubicModel::new(v(&[0.0]), Matrix::identity(1, 1), AnchorSet::Explicit(&[]), 1.0).is_err());
        let sums = CubeSums::from_anchors(&anchors);
        let model = CubicModel::new(v(&[0.0]), Matrix::identity(1, 1), AnchorSet::Sums(&sums), 1.0).unwrap();
        assert!(solve_multi_anchor(&model, NormMode::L2, InnerOptions::default()).is_err());
    }
}
