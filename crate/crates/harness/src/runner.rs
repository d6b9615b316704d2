//! Experiment drivers behind the CLI subcommands.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snewton_core::baselines::{cubic_newton_step, incremental_newton_step, newton_step};
use snewton_core::problem::{full_gradient, full_value};
use snewton_core::sampling::binomial;
use snewton_core::sn::{lyapunov_w, ENUMERATION_BUDGET};
use snewton_core::verify::{Check, CheckKind, Outcome};
use snewton_core::{
    Certified, FiniteSum, GlmFastState, GlmProblem, InnerOptions, NormMode, ReferenceSolution, ScnConfig,
    ScnState, SnState, Vector,
};

use crate::config::{AnchorInit, Method, RunConfig};
use crate::error::HarnessError;
use crate::problem::{build_problem, reference, start_point, Problem};
use crate::trace::TraceRecord;

pub const DEFAULT_RUN_ITERS: usize = 1000;
pub const DEFAULT_VERIFY_STEPS: usize = 30;
/// Steps between inverse-residual repairs on the GLM fast path.
pub const REPAIR_EVERY: usize = 100;
pub const REPAIR_THRESHOLD: f64 = 1e-8;

enum Solver<'p> {
    Sn(SnState),
    SnGlm {
        state: GlmFastState,
        glm: &'p GlmProblem,
        anchors: Option<Vec<Vector>>,
    },
    Scn(ScnState),
    Newton(Vector),
    CubicNewton(Vector),
    IncNewton(SnState),
}

impl<'p> Solver<'p> {
    fn new(problem: &'p Problem, cfg: &RunConfig, x0: &Vector) -> Result<Self, HarnessError> {
        let n = problem.num_components();
        if !cfg.method.is_deterministic() && cfg.tau > n {
            return Err(HarnessError::validation(format!("tau = {} must lie in [1, {n}]", cfg.tau)));
        }
        Ok(match cfg.method {
            Method::Sn => Solver::Sn(SnState::new(problem, x0.clone(), cfg.tau, cfg.seed)?.with_policy(cfg.policy)),
            Method::IncNewton => Solver::IncNewton(SnState::new(problem, x0.clone(), 1, cfg.seed)?.with_policy(cfg.policy)),
            Method::SnGlm => {
                let glm = problem
                    .as_glm()
                    .ok_or_else(|| HarnessError::validation("sn_glm needs a GLM problem"))?;
                if !glm.is_per_sample() {
                    return Err(HarnessError::validation("sn_glm needs one component per row (omit parts)"));
                }
                Solver::SnGlm {
                    state: GlmFastState::new(glm, x0, cfg.tau, cfg.seed)?,
                    glm,
                    anchors: cfg.track_lyapunov.then(|| vec![x0.clone(); n]),
                }
            }
            Method::Scn => {
                let sc = ScnConfig::new(cfg.tau, cfg.m.expect("validated"))
                    .with_norm(cfg.norm)
                    .with_inner(InnerOptions {
                        tol: cfg.inner_tol,
                        max_iter: cfg.inner_max_iter,
                    });
                Solver::Scn(ScnState::new(problem, x0.clone(), sc, cfg.seed)?)
            }
            Method::Newton => Solver::Newton(x0.clone()),
            Method::CubicNewton => Solver::CubicNewton(x0.clone()),
        })
    }

    fn x(&self) -> &Vector {
        match self {
            Solver::Sn(s) | Solver::IncNewton(s) => s.x(),
            Solver::SnGlm { state, .. } => state.x(),
            Solver::Scn(s) => s.x(),
            Solver::Newton(x) | Solver::CubicNewton(x) => x,
        }
    }

    fn step(&mut self, problem: &Problem, cfg: &RunConfig, k: usize) -> snewton_core::Result<()> {
        match self {
            Solver::Sn(s) => s.step(problem).map(drop),
            Solver::IncNewton(s) => incremental_newton_step(s, problem).map(drop),
            Solver::SnGlm { state, glm, anchors } => {
                let x = state.step(glm)?;
                if let Some(a) = anchors {
                    for &i in state.last_subset() {
                        a[i] = x.clone();
                    }
                }
                if (k + 1) % REPAIR_EVERY == 0 {
                    state.repair_if_drifted(glm, REPAIR_THRESHOLD)?;
                }
                Ok(())
            }
            Solver::Scn(s) => s.step(problem).map(drop),
            Solver::Newton(x) => {
                *x = newton_step(problem, x, cfg.policy)?;
                Ok(())
            }
            Solver::CubicNewton(x) => {
                *x = cubic_newton_step(problem, x, cfg.m.expect("validated"), cfg.inner_tol)?;
                Ok(())
            }
        }
    }

    /// Fresh gradient+Hessian evaluations so far.
    fn fresh_evals(&self, n: usize, k: usize) -> u64 {
        match self {
            Solver::Sn(s) | Solver::IncNewton(s) => s.evals().fresh,
            Solver::SnGlm { state, .. } => state.fresh_evals(),
            Solver::Scn(s) => s.evals().fresh,
            Solver::Newton(_) | Solver::CubicNewton(_) => (n * k) as u64,
        }
    }

    fn anchors(&self) -> Option<&[Vector]> {
        match self {
            Solver::Sn(s) | Solver::IncNewton(s) => Some(s.anchors()),
            Solver::SnGlm { anchors, .. } => anchors.as_deref(),
            Solver::Scn(s) => Some(s.anchors()),
            Solver::Newton(x) | Solver::CubicNewton(x) => Some(std::slice::from_ref(x)),
        }
    }
}

fn lyapunov_v(problem: &Problem, anchors: &[Vector], f_star: f64) -> f64 {
    anchors
        .iter()
        .map(|w| (full_value(problem, w) - f_star).max(0.0).powf(1.5))
        .sum::<f64>()
        / anchors.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub converged: bool,
    pub iterations: usize,
    pub epochs: f64,
    pub fresh_evals: u64,
    pub f_sub: f64,
    pub grad_norm: f64,
    pub dist: f64,
    pub f_star: f64,
    pub notices: Vec<String>,
    pub echo: Vec<(String, String)>,
}

impl Summary {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("label={}", self.label),
            format!("converged={}", self.converged),
            format!("iterations={}", self.iterations),
            format!("epochs={:e}", self.epochs),
            format!("fresh_evals={}", self.fresh_evals),
            format!("f_sub={:e}", self.f_sub),
            format!("grad_norm={:e}", self.grad_norm),
            format!("dist={:e}", self.dist),
            format!("f_star={:e}", self.f_star),
        ];
        out.extend(self.notices.iter().map(|n| format!("notice={n}")));
        out.extend(self.echo.iter().map(|(k, v)| format!("config.{k}={v}")));
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: Summary,
}

/// Runs one configuration against an already built problem and reference.
pub fn run_on(problem: &Problem, reference: &ReferenceSolution, cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    let start = Instant::now();
    let n = problem.num_components();
    let x0 = start_point(&cfg.x0, problem.dim())?;
    let mut solver = Solver::new(problem, cfg, &x0)?;
    let budget = cfg.max_iters.unwrap_or(DEFAULT_RUN_ITERS);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut nonconvex = false;
    let mut k = 0;
    loop {
        if let Solver::Scn(s) = &solver {
            nonconvex |= s.config().norm == NormMode::L3 && !s.cube_sums().penalty_is_convex();
        }
        let x = solver.x();
        let f = full_value(problem, x);
        if !f.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::solver(
                format!("{} diverged at iteration {k}", cfg.label),
                snewton_core::Error::NonFinite,
            ));
        }
        let raw = f - reference.f_star;
        let (w, v) = match (cfg.track_lyapunov, solver.anchors()) {
            (true, Some(a)) => (Some(lyapunov_w(a, &reference.x_star)), Some(lyapunov_v(problem, a, reference.f_star))),
            _ => (None, None),
        };
        trace.push(TraceRecord {
            method: cfg.label.clone(),
            k,
            epochs: solver.fresh_evals(n, k) as f64 / n as f64,
            f_sub: raw.max(0.0),
            grad_norm: full_gradient(problem, x).norm(),
            w,
            v,
            dist: (x - &reference.x_star).norm(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if raw <= cfg.stop_tol {
            converged = true;
            break;
        }
        if k == budget {
            break;
        }
        solver
            .step(problem, cfg, k)
            .map_err(|e| HarnessError::solver(format!("{} failed at iteration {k}", cfg.label), e))?;
        k += 1;
    }
    let last = trace.last().expect("at least the initial record");
    let summary = Summary {
        label: cfg.label.clone(),
        converged,
        iterations: k,
        epochs: last.epochs,
        fresh_evals: solver.fresh_evals(n, k),
        f_sub: last.f_sub,
        grad_norm: last.grad_norm,
        dist: last.dist,
        f_star: reference.f_star,
        notices: if nonconvex {
            vec!["l3 surrogate was nonconvex on some coordinates (positive mean anchor)".into()]
        } else {
            vec![]
        },
        echo: cfg.echo(),
    };
    Ok(RunOutput { trace, summary })
}

pub fn run(cfg: &RunConfig) -> Result<(RunOutput, ReferenceSolution), HarnessError> {
    let problem = build_problem(&cfg.problem)?;
    let r = reference(&problem, &cfg.reference)?;
    Ok((run_on(&problem, &r, cfg)?, r))
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub reference: ReferenceSolution,
    pub runs: Vec<RunOutput>,
}

impl CompareOutput {
    pub fn records(&self) -> impl Iterator<Item = &TraceRecord> {
        self.runs.iter().flat_map(|r| r.trace.iter())
    }
}

/// Gives repeated labels the suffixes `#2`, `#3`, ...
pub fn disambiguate(labels: &mut [String]) {
    let mut seen = std::collections::HashMap::<String, usize>::new();
    for l in labels.iter_mut() {
        let count = seen.entry(l.clone()).or_insert(0);
        *count += 1;
        if *count > 1 {
            *l = format!("{l}#{count}");
        }
    }
}

/// Runs several configurations on one problem with a single shared
/// reference solve.
pub fn compare(configs: &[RunConfig]) -> Result<CompareOutput, HarnessError> {
    if configs.len() < 2 {
        return Err(HarnessError::validation("compare needs at least two [run] sections"));
    }
    let first = &configs[0];
    if configs.iter().any(|c| c.problem != first.problem) {
        return Err(HarnessError::validation("problem specs differ"));
    }
    if configs.iter().any(|c| c.reference != first.reference) {
        return Err(HarnessError::validation("reference settings differ"));
    }
    let mut configs = configs.to_vec();
    let mut labels: Vec<String> = configs.iter().map(|c| c.label.clone()).collect();
    disambiguate(&mut labels);
    for (c, l) in configs.iter_mut().zip(labels) {
        c.label = l;
    }
    let problem = build_problem(&first.problem)?;
    let r = reference(&problem, &first.reference)?;
    let runs = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let (problem, r) = (&problem, &r);
                s.spawn(move || run_on(problem, r, c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(CompareOutput { reference: r, runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub m: f64,
    pub converged: bool,
    pub iterations: usize,
    pub epochs: f64,
    pub f_sub: f64,
    /// Failure description for runs that errored.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutput {
    pub method: Method,
    pub best_m: f64,
    pub smallest_convergent_m: f64,
    pub table: Vec<TuneRow>,
}

impl TuneOutput {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("method={}", self.method.name()), "M,converged,iterations,epochs,f_sub,note".into()];
        out.extend(self.table.iter().map(|r| {
            format!("{:e},{},{},{:e},{:e},{}", r.m, r.converged, r.iterations, r.epochs, r.f_sub, r.note)
        }));
        out.push(format!("best_M={:e}", self.best_m));
        out.push(format!("smallest_convergent_M={:e}", self.smallest_convergent_m));
        out
    }
}

/// Runs the configured cubic method once per grid value. A value converges
/// when `f - f*` reaches `stop_tol` within the iteration budget.
pub fn tune_m(cfg: &RunConfig, grid: &[f64]) -> Result<TuneOutput, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::validation("grid must not be empty"));
    }
    if grid.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(HarnessError::validation("grid values must be positive"));
    }
    if !cfg.method.needs_m() {
        return Err(HarnessError::validation("tune-m applies to methods scn and cubic_newton"));
    }
    let problem = build_problem(&cfg.problem)?;
    let r = reference(&problem, &cfg.reference)?;
    let table: Vec<TuneRow> = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&m| {
                let mut c = cfg.clone();
                c.m = Some(m);
                let (problem, r) = (&problem, &r);
                s.spawn(move || match run_on(problem, r, &c) {
                    Ok(out) => TuneRow {
                        m,
                        converged: out.summary.converged,
                        iterations: out.summary.iterations,
                        epochs: out.summary.epochs,
                        f_sub: out.summary.f_sub,
                        note: String::new(),
                    },
                    Err(e) => TuneRow {
                        m,
                        converged: false,
                        iterations: 0,
                        epochs: f64::NAN,
                        f_sub: f64::NAN,
                        note: e.to_string().replace(',', ";"),
                    },
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("tune thread panicked")).collect()
    });
    let convergent: Vec<&TuneRow> = table.iter().filter(|r| r.converged).collect();
    if convergent.is_empty() {
        return Err(HarnessError::NoConvergentM(
            table
                .iter()
                .map(|r| {
                    if r.note.is_empty() {
                        format!("M={:e}: f_sub={:e} after {} iterations", r.m, r.f_sub, r.iterations)
                    } else {
                        format!("M={:e}: {}", r.m, r.note)
                    }
                })
                .collect(),
        ));
    }
    let best = convergent
        .iter()
        .min_by(|a, b| a.epochs.total_cmp(&b.epochs).then(a.m.total_cmp(&b.m)))
        .expect("nonempty");
    let smallest = convergent.iter().map(|r| r.m).fold(f64::INFINITY, f64::min);
    Ok(TuneOutput {
        method: cfg.method,
        best_m: best.m,
        smallest_convergent_m: smallest,
        table,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyLine {
    pub k: usize,
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub notices: Vec<String>,
    pub lines: Vec<VerifyLine>,
    /// Per-step `E[next Lyapunov] / current Lyapunov` and the local factor it
    /// should stay below.
    pub ratios: Vec<(usize, f64)>,
    pub factor: f64,
}

impl VerifyReport {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.lines.iter().filter(|l| l.check.outcome == outcome).count()
    }

    pub fn render(&self) -> Vec<String> {
        let mut out: Vec<String> = self.notices.iter().map(|n| format!("notice: {n}")).collect();
        for l in &self.lines {
            let c = &l.check;
            let status = match c.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::PremiseUnmet => "UNMET",
            };
            let kind = match c.kind {
                CheckKind::Identity => "identity",
                CheckKind::Inequality => "inequality",
            };
            out.push(format!(
                "k={} {} {kind} lhs={:e} rhs={:e} slack={:e} tol={:e} {status}",
                l.k,
                c.name,
                c.lhs,
                c.rhs,
                c.slack(),
                c.tolerance
            ));
        }
        if let Some(worst) = self.ratios.iter().map(|r| r.1).reduce(f64::max) {
            out.push(format!("contraction_factor={:e} worst_ratio={worst:e}", self.factor));
        }
        out.push(format!(
            "summary: pass={} fail={} unmet={}",
            self.count(Outcome::Pass),
            self.count(Outcome::Fail),
            self.count(Outcome::PremiseUnmet)
        ));
        out
    }
}

/// Seeded anchors inside the region where the local contraction holds:
/// `||w - x*|| <= mu/H` for SN, and additionally
/// `f(w) - f* <= 2 mu^3 / (M + H)^2` for SCN.
fn basin_anchors(
    problem: &Problem,
    r: &ReferenceSolution,
    c: Certified,
    m: Option<f64>,
    seed: u64,
) -> Vec<Vector> {
    let n = problem.num_components();
    let d = problem.dim();
    let radius = if c.hess_lip > 0.0 { 0.9 * c.mu / c.hess_lip } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let dir = Vector::from_fn(d, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            let len = radius * rng.random::<f64>() / dir.norm().max(1e-300);
            let mut w = &r.x_star + dir * len;
            if let Some(m) = m {
                let cap = 0.9 * 2.0 * c.mu.powi(3) / (m + c.hess_lip).powi(2);
                while full_value(problem, &w) - r.f_star > cap {
                    w = &r.x_star + (&w - &r.x_star) * 0.5;
                }
            }
            w
        })
        .collect()
}

/// Steps SN or SCN and runs the per-step theory checks with exact
/// expectations over all subsets.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, HarnessError> {
    if !matches!(cfg.method, Method::Sn | Method::Scn) {
        return Err(HarnessError::validation("verify applies to methods sn and scn"));
    }
    let problem = build_problem(&cfg.problem)?;
    let n = problem.num_components();
    if cfg.tau > n {
        return Err(HarnessError::validation(format!("tau = {} must lie in [1, {n}]", cfg.tau)));
    }
    if n > 8 && binomial(n, cfg.tau).is_none_or(|c| c > ENUMERATION_BUDGET) {
        return Err(HarnessError::validation(format!(
            "exact expectations need n <= 8 or C(n, tau) <= {ENUMERATION_BUDGET}"
        )));
    }
    let r = reference(&problem, &cfg.reference)?;
    let certified = problem.certified();
    let mut report = VerifyReport::default();
    if certified.is_none() {
        report
            .notices
            .push("constants not certified (mu = 0): checking identities only".into());
    }
    let anchors = match (cfg.anchors, certified) {
        (AnchorInit::Start, _) => vec![start_point(&cfg.x0, problem.dim())?; n],
        (AnchorInit::Basin, Some(c)) => basin_anchors(&problem, &r, c, cfg.m, cfg.seed ^ 0x5eed),
        (AnchorInit::Basin, None) => {
            return Err(HarnessError::validation("anchors = basin needs certified constants"));
        }
    };
    let frac = cfg.tau as f64 / n as f64;
    let steps = cfg.max_iters.unwrap_or(DEFAULT_VERIFY_STEPS);
    let fail = |k: usize| move |e| HarnessError::solver(format!("verify step {k}"), e);
    match cfg.method {
        Method::Sn => {
            report.factor = 1.0 - 0.75 * frac;
            let mut s = SnState::new(&problem, anchors, cfg.tau, cfg.seed)?.with_policy(cfg.policy);
            for k in 0..steps {
                let chk = s.check_theory(&r.x_star, certified).map_err(fail(k))?;
                if chk.expected.w > 0.0 {
                    let e = chk.expected.enumerated.unwrap_or(chk.expected.exact);
                    report.ratios.push((k, e / chk.expected.w));
                }
                report.lines.extend(chk.report.checks.into_iter().map(|check| VerifyLine { k, check }));
                s.step(&problem).map_err(fail(k))?;
            }
        }
        _ => {
            let m = cfg.m.expect("validated");
            report.factor = 1.0 - 0.5 * frac;
            if cfg.norm == NormMode::L3 {
                report
                    .notices
                    .push("norm = l3: inequalities are stated for l2; checking the identity only".into());
            }
            if let Some(c) = certified.filter(|c| m < c.hess_lip && cfg.norm == NormMode::L2) {
                report.notices.push(format!(
                    "M = {m:e} is below the certified H = {:e}: inequalities reported as UNMET",
                    c.hess_lip
                ));
            }
            let sc = ScnConfig::new(cfg.tau, m).with_norm(cfg.norm).with_inner(InnerOptions {
                tol: cfg.inner_tol,
                max_iter: cfg.inner_max_iter,
            });
            let mut s = ScnState::new(&problem, anchors, sc, cfg.seed)?;
            for k in 0..steps {
                let chk = s.check_theory(&problem, &r.x_star, r.f_star, certified).map_err(fail(k))?;
                if chk.v > 0.0 {
                    report.ratios.push((k, chk.enumerated.unwrap_or(chk.exact) / chk.v));
                }
                report.lines.extend(chk.report.checks.into_iter().map(|check| VerifyLine { k, check }));
                s.step(&problem).map_err(fail(k))?;
            }
        }
    }
    Ok(report)
}
