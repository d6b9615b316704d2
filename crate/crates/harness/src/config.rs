//! Flat `key = value` run configuration with `#` comments. Keys before the
//! first `[run]` header are shared; each `[run]` section adds or overrides
//! keys for one run of a comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use snewton_core::{Loss, NormMode, SolvePolicy};

pub type Section = BTreeMap<String, String>;

const PROBLEM_KEYS: &[&str] = &[
    "problem", "data", "dim", "rows", "d", "groups", "levels", "mu", "L", "data_seed", "loss", "lambda", "parts", "shuffle",
];
const RUN_KEYS: &[&str] = &[
    "method",
    "label",
    "tau",
    "M",
    "seed",
    "max_iters",
    "stop_tol",
    "x0",
    "inner_tol",
    "inner_max_iter",
    "norm",
    "track_lyapunov",
    "policy",
    "ref_tol",
    "ref_max_iter",
    "ref_m_fallback",
    "reference",
    "grid",
    "anchors",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub shared: Section,
    pub runs: Vec<Section>,
}

impl ConfigFile {
    /// One merged section per run; a file without `[run]` headers is a single
    /// run.
    pub fn merged(&self) -> Vec<Section> {
        if self.runs.is_empty() {
            return vec![self.shared.clone()];
        }
        self.runs
            .iter()
            .map(|r| {
                let mut m = self.shared.clone();
                m.extend(r.iter().map(|(k, v)| (k.clone(), v.clone())));
                m
            })
            .collect()
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, Vec<String>> {
    let mut file = ConfigFile::default();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if line == "[run]" {
                file.runs.push(Section::new());
            } else {
                errors.push(format!("line {}: unknown section {line}", i + 1));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected key = value", i + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !PROBLEM_KEYS.contains(&key) && !RUN_KEYS.contains(&key) {
            errors.push(format!("line {}: unknown key '{key}'", i + 1));
            continue;
        }
        let section = file.runs.last_mut().unwrap_or(&mut file.shared);
        if section.insert(key.to_string(), value.to_string()).is_some() {
            errors.push(format!("line {}: duplicate key '{key}'", i + 1));
        }
    }
    if errors.is_empty() {
        Ok(file)
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Value(f64),
    /// `1/(c n)` with `n` the number of data rows.
    PerRow(f64),
}

impl Lambda {
    pub fn resolve(self, rows: usize) -> f64 {
        match self {
            Lambda::Value(v) => v,
            Lambda::PerRow(c) => 1.0 / (c * rows as f64),
        }
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Value(v) => write!(f, "{v:e}"),
            Lambda::PerRow(c) => write!(f, "1/({c}n)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Libsvm(PathBuf),
    /// Dense `[-1, 1]` features with independent labels.
    SynthLogistic { rows: usize, d: usize },
    /// One-hot categorical features with planted labels.
    SynthOneHot { rows: usize, groups: usize, levels: usize },
    SynthQuadratic { n: usize, d: usize, mu: f64, l: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub source: Source,
    pub data_seed: u64,
    pub dim: Option<usize>,
    pub loss: Loss,
    pub lambda: Lambda,
    /// Number of components; `None` means one per row.
    pub parts: Option<usize>,
    pub shuffle: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sn,
    SnGlm,
    Scn,
    Newton,
    CubicNewton,
    IncNewton,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sn => "sn",
            Method::SnGlm => "sn_glm",
            Method::Scn => "scn",
            Method::Newton => "newton",
            Method::CubicNewton => "cubic_newton",
            Method::IncNewton => "inc_newton",
        }
    }

    pub fn needs_m(self) -> bool {
        matches!(self, Method::Scn | Method::CubicNewton)
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, Method::Newton | Method::CubicNewton)
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "sn" => Method::Sn,
            "sn_glm" => Method::SnGlm,
            "scn" => Method::Scn,
            "newton" => Method::Newton,
            "cubic_newton" => Method::CubicNewton,
            "inc_newton" => Method::IncNewton,
            _ => return Err(format!("unknown method '{s}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    Zeros,
    Const(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorInit {
    /// Every anchor at `x0`.
    Start,
    /// Seeded random anchors inside the local contraction region (verify).
    Basin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub m_fallback: f64,
    /// File holding `x*`, one value per line; solved for when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    pub label: String,
    pub tau: usize,
    pub m: Option<f64>,
    pub seed: u64,
    /// `None` defers to the command's default budget.
    pub max_iters: Option<usize>,
    pub stop_tol: f64,
    pub x0: StartPoint,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub norm: NormMode,
    pub track_lyapunov: bool,
    pub policy: SolvePolicy,
    pub reference: ReferenceSpec,
    pub grid: Option<Vec<f64>>,
    pub anchors: AnchorInit,
}

struct Reader<'a> {
    map: &'a Section,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        let raw = self.raw(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{key}: cannot parse '{raw}'"));
                None
            }
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T {
        self.parse(key).unwrap_or(default)
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.or(key, default);
        if !(v > 0.0) || !v.is_finite() {
            self.errors.push(format!("{key} must be positive and finite"));
        }
        v
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        let v = self.or(key, default);
        if v == 0 {
            self.errors.push(format!("{key} must be at least 1"));
        }
        v
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }
}

fn parse_lambda(raw: &str) -> Result<Lambda, String> {
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(inner) = compact.strip_prefix("1/(").and_then(|s| s.strip_suffix("n)")) {
        let c: f64 = inner.parse().map_err(|_| format!("lambda: cannot parse '{raw}'"))?;
        if !(c > 0.0) {
            return Err("lambda: the row multiplier must be positive".into());
        }
        return Ok(Lambda::PerRow(c));
    }
    match compact.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(Lambda::Value(v)),
        _ => Err(format!("lambda: expected a nonnegative number or 1/(c n), got '{raw}'")),
    }
}

pub fn parse_start(raw: &str) -> Result<StartPoint, String> {
    if raw == "zeros" {
        return Ok(StartPoint::Zeros);
    }
    if let Some(c) = raw.strip_prefix("const:") {
        return match c.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(StartPoint::Const(v)),
            _ => Err(format!("x0: cannot parse constant '{c}'")),
        };
    }
    if let Some(p) = raw.strip_prefix("file:") {
        return Ok(StartPoint::File(PathBuf::from(p)));
    }
    Err(format!("x0: expected zeros, const:C or file:PATH, got '{raw}'"))
}

/// `a,b,c` or `log:lo:hi:count` (log-spaced, inclusive).
pub fn parse_grid(raw: &str) -> Result<Vec<f64>, String> {
    let raw = raw.trim();
    let grid: Vec<f64> = if let Some(spec) = raw.strip_prefix("log:") {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || format!("grid: expected log:lo:hi:count, got '{raw}'");
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo) || count == 0 {
            return Err(bad());
        }
        if count == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    } else {
        raw.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("grid: cannot parse '{s}'")))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err("grid must not be empty".into());
    }
    if grid.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err("grid values must be positive".into());
    }
    Ok(grid)
}

fn problem_spec(r: &mut Reader<'_>) -> Option<ProblemSpec> {
    let kind = r.raw("problem").unwrap_or("synth_logistic").to_string();
    let source = match kind.as_str() {
        "libsvm" => match r.raw("data") {
            Some(p) => Some(Source::Libsvm(PathBuf::from(p))),
            None => {
                r.fail("problem = libsvm requires data = PATH");
                None
            }
        },
        "synth_logistic" => Some(Source::SynthLogistic {
            rows: r.count("rows", 100),
            d: r.count("d", 10),
        }),
        "synth_onehot" => Some(Source::SynthOneHot {
            rows: r.count("rows", 1000),
            groups: r.count("groups", 14),
            levels: r.count("levels", 9),
        }),
        "synth_quadratic" => {
            let mu = r.positive("mu", 1.0);
            let l = r.positive("L", 10.0);
            if l < mu {
                r.fail("L must be at least mu");
            }
            Some(Source::SynthQuadratic {
                n: r.count("rows", 10),
                d: r.count("d", 5),
                mu,
                l,
            })
        }
        other => {
            r.fail(format!(
                "unknown problem '{other}' (libsvm, synth_logistic, synth_onehot, synth_quadratic)"
            ));
            None
        }
    };
    if kind == "synth_quadratic" && (r.raw("parts").is_some() || r.raw("lambda").is_some()) {
        r.fail("parts and lambda do not apply to synth_quadratic");
    }
    let loss = match r.raw("loss").unwrap_or("logistic") {
        "logistic" => Loss::Logistic,
        "squared" => Loss::Squared,
        other => {
            r.fail(format!("unknown loss '{other}' (logistic, squared)"));
            Loss::Logistic
        }
    };
    let lambda = match parse_lambda(r.raw("lambda").unwrap_or("1/(100n)")) {
        Ok(l) => l,
        Err(e) => {
            r.fail(e);
            Lambda::Value(0.0)
        }
    };
    let parts = r.parse::<usize>("parts");
    if parts == Some(0) {
        r.fail("parts must be at least 1");
    }
    Some(ProblemSpec {
        source: source?,
        data_seed: r.or("data_seed", 0),
        dim: r.parse("dim"),
        loss,
        lambda,
        parts,
        shuffle: r.parse("shuffle"),
    })
}

impl RunConfig {
    /// Builds and validates one run, reporting every problem found.
    pub fn from_section(map: &Section) -> Result<RunConfig, Vec<String>> {
        let mut r = Reader {
            map,
            errors: Vec::new(),
        };
        let problem = problem_spec(&mut r);
        let method = r.or("method", Method::Sn);
        let m = r.parse::<f64>("M");
        match (method.needs_m(), m) {
            (true, None) => r.fail(format!("method {} requires M", method.name())),
            (true, Some(m)) if !(m > 0.0) || !m.is_finite() => r.fail("M must be positive"),
            (false, Some(_)) => r.fail(format!("M does not apply to method {}", method.name())),
            _ => {}
        }
        let tau_given = r.parse::<usize>("tau");
        let tau = tau_given.unwrap_or(1);
        if tau == 0 {
            r.fail("tau must be at least 1");
        }
        if method.is_deterministic() && tau_given.is_some() {
            r.fail(format!("tau does not apply to method {}", method.name()));
        }
        if method == Method::IncNewton && tau != 1 {
            r.fail("inc_newton processes one component per step (tau = 1)");
        }
        let max_iters = r.parse::<usize>("max_iters");
        if max_iters == Some(0) {
            r.fail("max_iters must be at least 1");
        }
        let stop_tol = r.or("stop_tol", 1e-10);
        if !(stop_tol >= 0.0) {
            r.fail("stop_tol must be nonnegative");
        }
        let x0 = match parse_start(r.raw("x0").unwrap_or("zeros")) {
            Ok(x) => x,
            Err(e) => {
                r.fail(e);
                StartPoint::Zeros
            }
        };
        let inner_tol = r.positive("inner_tol", 1e-9);
        let inner_max_iter = r.count("inner_max_iter", 100_000);
        let norm = match r.raw("norm").unwrap_or("l2") {
            "l2" => NormMode::L2,
            "l3" => NormMode::L3,
            other => {
                r.fail(format!("unknown norm '{other}' (l2, l3)"));
                NormMode::L2
            }
        };
        if norm == NormMode::L3 && method != Method::Scn {
            r.fail("norm = l3 applies only to method scn");
        }
        let policy = match r.raw("policy").unwrap_or("error") {
            "error" => SolvePolicy::Error,
            "jitter" => SolvePolicy::Jitter,
            other => {
                r.fail(format!("unknown policy '{other}' (error, jitter)"));
                SolvePolicy::Error
            }
        };
        let reference = ReferenceSpec {
            tol: r.positive("ref_tol", 1e-12),
            max_iter: r.count("ref_max_iter", 200),
            m_fallback: r.positive("ref_m_fallback", 1.0),
            path: r.raw("reference").map(PathBuf::from),
        };
        let grid = match r.raw("grid").map(parse_grid) {
            Some(Ok(g)) => Some(g),
            Some(Err(e)) => {
                r.fail(e);
                None
            }
            None => None,
        };
        let anchors = match r.raw("anchors").unwrap_or("x0") {
            "x0" => AnchorInit::Start,
            "basin" => AnchorInit::Basin,
            other => {
                r.fail(format!("unknown anchors '{other}' (x0, basin)"));
                AnchorInit::Start
            }
        };
        let config = RunConfig {
            problem: problem.unwrap_or_else(|| unreachable_problem()),
            method,
            label: r.raw("label").unwrap_or(method.name()).to_string(),
            tau,
            m,
            seed: r.or("seed", 0),
            max_iters,
            stop_tol,
            x0,
            inner_tol,
            inner_max_iter,
            norm,
            track_lyapunov: r.or("track_lyapunov", false),
            policy,
            reference,
            grid,
            anchors,
        };
        if r.errors.is_empty() {
            Ok(config)
        } else {
            Err(r.errors)
        }
    }

    /// Key/value echo of the effective configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.problem;
        let mut out = vec![];
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        match &p.source {
            Source::Libsvm(path) => {
                put("problem", "libsvm".into());
                put("data", path.display().to_string());
            }
            Source::SynthLogistic { rows, d } => {
                put("problem", "synth_logistic".into());
                put("rows", rows.to_string());
                put("d", d.to_string());
            }
            Source::SynthOneHot { rows, groups, levels } => {
                put("problem", "synth_onehot".into());
                put("rows", rows.to_string());
                put("groups", groups.to_string());
                put("levels", levels.to_string());
            }
            Source::SynthQuadratic { n, d, mu, l } => {
                put("problem", "synth_quadratic".into());
                put("rows", n.to_string());
                put("d", d.to_string());
                put("mu", format!("{mu:e}"));
                put("L", format!("{l:e}"));
            }
        }
        put("data_seed", p.data_seed.to_string());
        if !matches!(p.source, Source::SynthQuadratic { .. }) {
            put("loss", format!("{:?}", p.loss).to_lowercase());
            put("lambda", p.lambda.to_string());
            put("parts", p.parts.map_or("rows".into(), |v| v.to_string()));
        }
        put("method", self.method.name().into());
        put("tau", self.tau.to_string());
        if let Some(m) = self.m {
            put("M", format!("{m:e}"));
        }
        put("seed", self.seed.to_string());
        put("stop_tol", format!("{:e}", self.stop_tol));
        put(
            "x0",
            match &self.x0 {
                StartPoint::Zeros => "zeros".into(),
                StartPoint::Const(c) => format!("const:{c}"),
                StartPoint::File(f) => format!("file:{}", f.display()),
            },
        );
        put("norm", if self.norm == NormMode::L3 { "l3" } else { "l2" }.into());
        put("inner_tol", format!("{:e}", self.inner_tol));
        put("ref_tol", format!("{:e}", self.reference.tol));
        out
    }
}

// Only reached when validation already recorded an error for the problem.
fn unreachable_problem() -> ProblemSpec {
    ProblemSpec {
        source: Source::SynthLogistic { rows: 1, d: 1 },
        data_seed: 0,
        dim: None,
        loss: Loss::Logistic,
        lambda: Lambda::Value(0.0),
        parts: None,
        shuffle: None,
    }
}

/// Parses text plus command-line overrides (applied to every run) into
/// validated run configurations.
pub fn load_runs(text: &str, overrides: &[(String, String)]) -> Result<Vec<RunConfig>, Vec<String>> {
    let file = parse_config(text)?;
    let mut errors = Vec::new();
    let mut runs = Vec::new();
    for (i, mut section) in file.merged().into_iter().enumerate() {
        for (k, v) in overrides {
            section.insert(k.clone(), v.clone());
        }
        match RunConfig::from_section(&section) {
            Ok(c) => runs.push(c),
            Err(es) if file.runs.len() > 1 => errors.extend(es.into_iter().map(|e| format!("run {}: {e}", i + 1))),
            Err(es) => errors.extend(es),
        }
    }
    if errors.is_empty() {
        Ok(runs)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> Result<RunConfig, Vec<String>> {
        load_runs(text, &[]).map(|mut v| v.remove(0))
    }

    #[test]
    fn defaults_and_comments() {
        let c = one("# only a comment\nmethod = sn # trailing\n").unwrap();
        assert_eq!(c.method, Method::Sn);
        assert_eq!(c.tau, 1);
        assert_eq!(c.problem.lambda, Lambda::PerRow(100.0));
        assert_eq!(c.x0, StartPoint::Zeros);
    }

    #[test]
    fn lambda_forms() {
        assert_eq!(parse_lambda("0").unwrap(), Lambda::Value(0.0));
        assert_eq!(parse_lambda("1/(10000n)").unwrap(), Lambda::PerRow(1e4));
        assert_eq!(parse_lambda("1 / (100 n)").unwrap().resolve(50), 1.0 / 5000.0);
        assert!(parse_lambda("-1").is_err());
    }

    #[test]
    fn start_points() {
        assert_eq!(parse_start("const:0.5").unwrap(), StartPoint::Const(0.5));
        assert_eq!(parse_start("file:x.txt").unwrap(), StartPoint::File("x.txt".into()));
        assert!(parse_start("ones").is_err());
    }

    #[test]
    fn validation_lists_every_error() {
        let errs = one("method = scn\ntau = 0\nnorm = l4\nloss = hinge\n").unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("requires M")));
        let errs = one("method = newton\nM = 1\n").unwrap_err();
        assert!(errs[0].contains("does not apply"));
        assert!(one("bogus = 1").is_err());
        assert!(one("method = inc_newton\ntau = 2").is_err());
    }

    #[test]
    fn grid_forms() {
        let g = parse_grid("log:1e-3:1e3:13").unwrap();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[12] - 1e3).abs() < 1e-9 && (g[6] - 1.0).abs() < 1e-12);
        assert_eq!(parse_grid("0.1, 1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1,-2").is_err());
    }

    #[test]
    fn sections_inherit_and_overrides_win() {
        let text = "rows = 20\nd = 3\n[run]\nmethod = newton\n[run]\nmethod = scn\nM = 2\n";
        let runs = load_runs(text, &[("seed".into(), "7".into())]).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1].m, Some(2.0));
        assert!(runs.iter().all(|r| r.seed == 7 && r.problem == runs[0].problem));
        let errs = load_runs("[run]\nmethod = scn\n[run]\nmethod = sn\n", &[]).unwrap_err();
        assert_eq!(errs, vec!["run 1: method scn requires M".to_string()]);
    }
}
