//! Stochastic Newton and stochastic cubic Newton for finite-sum
//! minimization.
//!
//! The crate is `no_std` (with `alloc`). It provides
//!
//! * the [`FiniteSum`] oracle trait with quadratic and regularized GLM
//!   instances,
//! * [`SnState`], the stochastic Newton iteration, and [`GlmFastState`], its
//!   Sherman-Morrison specialization for per-sample GLMs,
//! * [`ScnState`], the stochastic cubic Newton iteration, and the cubic
//!   subproblem solvers in [`cubic`],
//! * full Newton, cubic Newton and incremental Newton baselines,
//! * per-step checks of the convergence inequalities ([`verify`]).
//!
//! File formats, configuration and the command-line driver live in the
//! `snewton-harness` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod cubic;
pub mod error;
pub mod glm;
pub mod glm_fast;
pub mod linalg;
pub mod math;
pub mod problem;
pub mod quadratic;
pub mod sampling;
pub mod scn;
pub mod sn;
pub mod verify;

pub use baselines::{
    cubic_newton_step, incremental_newton_step, newton_step, solve_reference, ReferenceMethod,
    ReferenceOptions, ReferenceSolution,
};
pub use cubic::{CubeSums, CubicModel, InnerOptions, InnerSolution, NormMode};
pub use error::{Error, Result};
pub use glm::{partition, synth_logistic, synth_logistic_dataset, GlmProblem, Loss, SparseDataset};
pub use glm_fast::GlmFastState;
pub use linalg::{Matrix, SolvePolicy, Vector};
pub use problem::{eval_component, eval_full, estimate_constants, ComponentEval, FiniteSum, FullEval};
pub use quadratic::{synth_quadratic, QuadraticSum};
pub use sampling::{Cyclic, SubsetSampler, UniformSubsets};
pub use scn::{ScnConfig, ScnState};
pub use sn::{EvalCount, InitialAnchors, SnState};
pub use verify::{Certified, Check, Outcome, StepReport};
