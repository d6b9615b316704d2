use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snewton_harness::config::parse_grid;
use snewton_harness::problem::{build_problem, reference, write_vector};
use snewton_harness::trace::{write_csv, TraceRecord};
use snewton_harness::verify::Outcome;
use snewton_harness::{compare, load_runs, run, tune_m, verify, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "snewton", version, about = "Stochastic Newton experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write its convergence trace.
    Run(Common),
    /// Run every [run] section on a shared problem and merge the traces.
    Compare(Common),
    /// Check the per-step theory bounds with exact expectations.
    Verify(Common),
    /// Find the smallest convergent and the fastest cubic regularization M.
    #[command(name = "tune-m")]
    TuneM {
        #[command(flatten)]
        common: Common,
        /// Comma-separated values or log:LO:HI:COUNT.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Solve for x* and write it one value per line.
    #[command(name = "solve-ref")]
    SolveRef(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    parts: Option<usize>,
    /// zeros, const:C or file:PATH
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stop once f - f* is at most this.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    track_lyapunov: bool,
}

impl Common {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("seed", self.seed.map(|v| v.to_string()));
        put("method", self.method.clone());
        put("tau", self.tau.map(|v| v.to_string()));
        put("M", self.m.map(|v| v.to_string()));
        put("lambda", self.lambda.clone());
        put("parts", self.parts.map(|v| v.to_string()));
        put("x0", self.x0.clone());
        put("max_iters", self.max_iters.map(|v| v.to_string()));
        put("stop_tol", self.tol.map(|v| v.to_string()));
        put("norm", self.norm.clone());
        put("track_lyapunov", self.track_lyapunov.then(|| "true".into()));
        o
    }

    fn runs(&self) -> Result<Vec<RunConfig>, HarnessError> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        load_runs(&text, &self.overrides()).map_err(HarnessError::Validation)
    }

    fn single(&self) -> Result<RunConfig, HarnessError> {
        let mut runs = self.runs()?;
        if runs.len() != 1 {
            return Err(HarnessError::validation("this command takes a single run; use compare for [run] sections"));
        }
        Ok(runs.remove(0))
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_trace<'a>(path: Option<&Path>, records: impl IntoIterator<Item = &'a TraceRecord>) -> Result<(), HarnessError> {
    let mut out = output(path)?;
    write_csv(&mut out, records).map_err(|e| HarnessError::Io(e.into()))?;
    out.flush()?;
    Ok(())
}

/// Summaries go to stderr when the trace occupies stdout.
fn report(lines: &[String], trace_on_stdout: bool) {
    for l in lines {
        if trace_on_stdout {
            eprintln!("{l}");
        } else {
            println!("{l}");
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.single()?;
            let (out, _) = run(&cfg)?;
            write_trace(c.out.as_deref(), &out.trace)?;
            report(&out.summary.lines(), c.out.is_none());
        }
        Command::Compare(c) => {
            let out = compare(&c.runs()?)?;
            write_trace(c.out.as_deref(), out.records())?;
            let lines: Vec<String> = out.runs.iter().flat_map(|r| r.summary.lines()).collect();
            report(&lines, c.out.is_none());
        }
        Command::Verify(c) => {
            let rep = verify(&c.single()?)?;
            let mut out = output(c.out.as_deref())?;
            for l in rep.render() {
                writeln!(out, "{l}")?;
            }
            out.flush()?;
            let failed = rep.count(Outcome::Fail);
            if failed > 0 {
                return Err(HarnessError::VerificationFailed(failed));
            }
        }
        Command::TuneM { common, grid } => {
            let cfg = common.single()?;
            let grid = match grid {
                Some(g) => parse_grid(&g).map_err(HarnessError::validation)?,
                None => cfg
                    .grid
                    .clone()
                    .ok_or_else(|| HarnessError::validation("tune-m needs a grid (--grid or grid = ...)"))?,
            };
            let res = tune_m(&cfg, &grid)?;
            let mut out = output(common.out.as_deref())?;
            for l in res.lines() {
                writeln!(out, "{l}")?;
            }
            out.flush()?;
        }
        Command::SolveRef(c) => {
            let cfg = c.single()?;
            let problem = build_problem(&cfg.problem)?;
            let r = reference(&problem, &cfg.reference)?;
            match &c.out {
                Some(p) => write_vector(p, &r.x_star)?,
                None => r.x_star.iter().for_each(|v| println!("{v:e}")),
            }
            report(
                &[
                    format!("f_star={:e}", r.f_star),
                    format!("grad_norm={:e}", r.grad_norm),
                    format!("iterations={}", r.iterations),
                    format!("method={:?}", r.method),
                ],
                c.out.is_none(),
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
