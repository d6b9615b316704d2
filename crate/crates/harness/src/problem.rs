//! Turns a [`ProblemSpec`] into a concrete finite sum.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snewton_core::{
    partition, solve_reference, synth_logistic_dataset, synth_quadratic, Certified, FiniteSum, GlmProblem,
    Matrix, QuadraticSum, ReferenceOptions, ReferenceSolution, SparseDataset, Vector,
};

use crate::config::{ProblemSpec, ReferenceSpec, Source, StartPoint};
use crate::error::HarnessError;
use crate::libsvm;

#[derive(Debug, Clone)]
pub enum Problem {
    Glm(GlmProblem),
    Quadratic(QuadraticSum),
}

impl Problem {
    pub fn as_glm(&self) -> Option<&GlmProblem> {
        match self {
            Problem::Glm(p) => Some(p),
            Problem::Quadratic(_) => None,
        }
    }

    /// Certified `mu` and Hessian-Lipschitz constant, when `mu > 0`.
    pub fn certified(&self) -> Option<Certified> {
        let c = Certified {
            mu: self.strong_convexity(),
            hess_lip: self.hessian_lipschitz(),
        };
        (c.mu > 0.0).then_some(c)
    }
}

impl FiniteSum for Problem {
    fn num_components(&self) -> usize {
        match self {
            Problem::Glm(p) => p.num_components(),
            Problem::Quadratic(p) => p.num_components(),
        }
    }
    fn dim(&self) -> usize {
        match self {
            Problem::Glm(p) => p.dim(),
            Problem::Quadratic(p) => p.dim(),
        }
    }
    fn value(&self, i: usize, x: &Vector) -> f64 {
        match self {
            Problem::Glm(p) => p.value(i, x),
            Problem::Quadratic(p) => p.value(i, x),
        }
    }
    fn gradient(&self, i: usize, x: &Vector) -> Vector {
        match self {
            Problem::Glm(p) => p.gradient(i, x),
            Problem::Quadratic(p) => p.gradient(i, x),
        }
    }
    fn hessian(&self, i: usize, x: &Vector) -> Matrix {
        match self {
            Problem::Glm(p) => p.hessian(i, x),
            Problem::Quadratic(p) => p.hessian(i, x),
        }
    }
    fn strong_convexity(&self) -> f64 {
        match self {
            Problem::Glm(p) => p.strong_convexity(),
            Problem::Quadratic(p) => p.strong_convexity(),
        }
    }
    fn hessian_lipschitz(&self) -> f64 {
        match self {
            Problem::Glm(p) => p.hessian_lipschitz(),
            Problem::Quadratic(p) => p.hessian_lipschitz(),
        }
    }
}

/// One-hot encoded categorical rows: `groups` attributes with `levels`
/// values each, level `j` drawn with probability proportional to
/// `1/(j+1)`. Labels follow a logistic model around seeded planted weights
/// with a negative offset, so the classes are unbalanced. Every row has
/// exactly `groups` ones and the columns of each group sum to the all-ones
/// vector, which leaves the unregularized Hessian nearly singular.
pub fn synth_onehot_dataset(seed: u64, rows: usize, groups: usize, levels: usize) -> Result<SparseDataset, HarnessError> {
    if rows == 0 || groups == 0 || levels == 0 {
        return Err(HarnessError::validation("synth_onehot needs rows, groups and levels >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = groups * levels;
    let planted: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let weights: Vec<f64> = (0..levels).map(|j| 1.0 / (j + 1) as f64).collect();
    let level = rand::distr::weighted::WeightedIndex::new(&weights).expect("positive weights");
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let idx: Vec<usize> = (0..groups).map(|g| g * levels + rng.sample(&level)).collect();
        let margin: f64 = idx.iter().map(|&j| planted[j]).sum::<f64>() - 1.0;
        let p = 1.0 / (1.0 + (-margin).exp());
        labels.push(if rng.random::<f64>() < p { 1.0 } else { -1.0 });
        data.push(idx.into_iter().map(|j| (j + 1, 1.0)).collect());
    }
    Ok(SparseDataset::new(data, labels, Some(d))?)
}

fn load_dataset(spec: &ProblemSpec) -> Result<Option<SparseDataset>, HarnessError> {
    Ok(match &spec.source {
        Source::Libsvm(path) => Some(
            libsvm::read_libsvm_file(path, spec.dim)
                .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?,
        ),
        Source::SynthLogistic { rows, d } => Some(synth_logistic_dataset(spec.data_seed, *rows, *d)?),
        Source::SynthOneHot { rows, groups, levels } => Some(synth_onehot_dataset(spec.data_seed, *rows, *groups, *levels)?),
        Source::SynthQuadratic { .. } => None,
    })
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Problem, HarnessError> {
    if let Source::SynthQuadratic { n, d, mu, l } = spec.source {
        return Ok(Problem::Quadratic(synth_quadratic(spec.data_seed, n, d, mu, l)?));
    }
    let data = load_dataset(spec)?.expect("dataset-backed source");
    let parts = spec.parts.unwrap_or(data.len());
    if parts > data.len() {
        return Err(HarnessError::validation(format!(
            "parts = {parts} exceeds the {} data rows",
            data.len()
        )));
    }
    let lambda = spec.lambda.resolve(data.len());
    Ok(Problem::Glm(partition(&data, parts, spec.loss, lambda, spec.shuffle)?))
}

pub fn read_vector(path: &Path, d: usize) -> Result<Vector, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    if values.len() != d {
        return Err(HarnessError::Data(format!(
            "{}: expected {d} values, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok(Vector::from_vec(values))
}

pub fn write_vector(path: &Path, x: &Vector) -> Result<(), HarnessError> {
    let text: String = x.iter().map(|v| format!("{v:e}\n")).collect();
    std::fs::write(path, text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

pub fn start_point(x0: &StartPoint, d: usize) -> Result<Vector, HarnessError> {
    match x0 {
        StartPoint::Zeros => Ok(Vector::zeros(d)),
        StartPoint::Const(c) => Ok(Vector::from_element(d, *c)),
        StartPoint::File(path) => read_vector(path, d),
    }
}

/// Loads `x*` from the reference file when given, otherwise runs the
/// reference solver from zero.
pub fn reference(problem: &Problem, spec: &ReferenceSpec) -> Result<ReferenceSolution, HarnessError> {
    let d = problem.dim();
    if let Some(path) = &spec.path {
        let x_star = read_vector(path, d)?;
        let grad_norm = snewton_core::problem::full_gradient(problem, &x_star).norm();
        return Ok(ReferenceSolution {
            f_star: snewton_core::problem::full_value(problem, &x_star),
            x_star,
            grad_norm,
            iterations: 0,
            method: snewton_core::ReferenceMethod::Newton,
        });
    }
    let opts = ReferenceOptions {
        tol: spec.tol,
        max_iter: spec.max_iter,
        m_fallback: spec.m_fallback,
    };
    solve_reference(problem, &Vector::zeros(d), opts).map_err(|e| HarnessError::solver("reference solve", e))
}
