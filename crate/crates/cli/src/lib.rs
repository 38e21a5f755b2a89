//! Benchmark harness: parses a run specification, drives one solver and
//! reports a CSV trace plus a one-line JSON summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};
use qlm_core::{
    lm_classic_solve, make_problem, qgn_solve, qlm_solve, qsd_solve, DampingState, Problem,
    QStrategy, SolveResult, SolverConfig, Termination,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SolverKind {
    Qlm,
    Qgn,
    Qsd,
    LmClassic,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Qlm => "qlm",
            SolverKind::Qgn => "qgn",
            SolverKind::Qsd => "qsd",
            SolverKind::LmClassic => "lm_classic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schedule {
    Fixed,
    Geometric,
}

#[derive(Debug, Parser)]
#[command(
    name = "qlm-bench",
    version,
    about = "Run a q-LM family solver on a test problem",
    allow_negative_numbers = true
)]
struct Args {
    /// Problem name: exponential_fit, linear_ls, powell_singular or rosenbrock.
    #[arg(long, default_value = "rosenbrock")]
    problem: String,
    /// Problem parameter as key=value; repeatable.
    #[arg(long = "problem-param", value_name = "KEY=VALUE")]
    problem_param: Vec<String>,
    #[arg(long, value_enum, default_value = "qlm")]
    solver: SolverKind,
    /// Initial q, one value or one per coordinate, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    q0: Vec<f64>,
    #[arg(long = "q-schedule", value_enum, default_value = "fixed")]
    q_schedule: Schedule,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    lambda0: f64,
    #[arg(long, default_value_t = 10.0)]
    mf: f64,
    #[arg(long, default_value_t = 0.1)]
    df: f64,
    #[arg(long = "lambda-max", default_value_t = 1e12)]
    lambda_max: f64,
    #[arg(long = "stop-iter", default_value_t = 1e-12)]
    stop_iter: f64,
    #[arg(long, default_value_t = 1e-10)]
    gtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    xtol: f64,
    #[arg(long = "max-iter", default_value_t = 1000)]
    max_iter: u32,
    /// Starting point override, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Recompute the Jacobian on every loop turn, including after rejections.
    #[arg(long = "strict-paper")]
    strict_paper: bool,
    /// Initial line-search step for qsd.
    #[arg(long, default_value_t = 1.0)]
    step0: f64,
    #[arg(long = "trace-out", value_name = "PATH")]
    trace_out: Option<PathBuf>,
}

/// A validated run specification.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: String,
    pub problem_params: BTreeMap<String, String>,
    pub solver: SolverKind,
    /// Either one value or one per coordinate.
    pub q0: Vec<f64>,
    pub q_schedule: Schedule,
    pub gamma: f64,
    pub damping: DampingState,
    pub config: SolverConfig,
    pub x0: Option<Vec<f64>>,
    pub step0: f64,
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text requested on the command line.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(#[from] qlm_core::Error),
    #[error("cannot write trace to {path}: {source}")]
    TraceWrite { path: PathBuf, source: io::Error },
    #[error("cannot write summary: {0}")]
    Output(#[source] io::Error),
}

fn flag_for(param: &str) -> &'static str {
    match param {
        "lambda" => "--lambda0",
        "mf" => "--mf",
        "df" => "--df",
        "lambda_max" => "--lambda-max",
        "max_no_iter" => "--max-iter",
        "stop_iter" => "--stop-iter",
        "gtol" => "--gtol",
        "xtol" => "--xtol",
        "gamma" => "--gamma",
        "q0" | "q" => "--q0",
        "step0" => "--step0",
        _ => "",
    }
}

fn usage(e: qlm_core::Error) -> CliError {
    match &e {
        qlm_core::Error::InvalidParameter { name, .. } if !flag_for(name).is_empty() => {
            CliError::Usage(format!("{}: {e}", flag_for(name)))
        }
        _ => CliError::Usage(e.to_string()),
    }
}

/// Parses command-line flags (without the program name) into a validated
/// [`RunSpec`].
pub fn parse_run_spec<I, S>(args: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once("qlm-bench".into()).chain(args.into_iter().map(Into::into));
    let a = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            CliError::Info(e.render().to_string())
        }
        _ => CliError::Usage(e.render().to_string()),
    })?;

    let mut problem_params = BTreeMap::new();
    for kv in &a.problem_param {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--problem-param: expected KEY=VALUE, got '{kv}'"))
        })?;
        if problem_params
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            return Err(CliError::Usage(format!(
                "--problem-param: key '{k}' given twice"
            )));
        }
    }

    let damping = DampingState::new(a.lambda0, a.mf, a.df, a.lambda_max).map_err(usage)?;
    let config = SolverConfig {
        stop_iter: a.stop_iter,
        max_no_iter: a.max_iter,
        gtol: a.gtol,
        xtol: a.xtol,
        strict_paper: a.strict_paper,
        ..SolverConfig::default()
    };
    config.validate().map_err(usage)?;
    // Validates every q0 entry and gamma; the dimension is checked once the
    // problem is known.
    build_schedule(Schedule::Geometric, a.q0.clone(), a.gamma).map_err(usage)?;
    if !(a.step0 > 0.0 && a.step0.is_finite()) {
        return Err(CliError::Usage(format!(
            "--step0: step0 must satisfy step0 > 0 (got {})",
            a.step0
        )));
    }
    if let Some(x0) = &a.x0 {
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("--x0: entries must be finite".into()));
        }
    }

    Ok(RunSpec {
        problem: a.problem,
        problem_params,
        solver: a.solver,
        q0: a.q0,
        q_schedule: a.q_schedule,
        gamma: a.gamma,
        damping,
        config,
        x0: a.x0,
        step0: a.step0,
        trace_path: a.trace_out,
    })
}

fn build_schedule(kind: Schedule, q0: Vec<f64>, gamma: f64) -> qlm_core::Result<QStrategy> {
    match kind {
        Schedule::Fixed => QStrategy::fixed(q0),
        Schedule::Geometric => QStrategy::geometric(q0, gamma),
    }
}

/// The one-line summary written to standard output.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub problem: String,
    pub solver: &'static str,
    pub termination: &'static str,
    pub iterations: usize,
    pub sse_final: f64,
    pub x_final: Vec<f64>,
    pub wall_time_ms: f64,
}

/// Maps a termination reason to the process exit status.
pub fn exit_status(t: Termination) -> i32 {
    if t.is_converged() {
        0
    } else {
        2
    }
}

/// Resolves the problem and the starting point named by `spec`.
pub fn resolve(spec: &RunSpec) -> Result<(Problem, Vec<f64>), CliError> {
    let problem = make_problem(&spec.problem, &spec.problem_params).map_err(usage)?;
    let n = problem.n();
    let x0 = match &spec.x0 {
        Some(x0) if x0.len() != n => {
            return Err(CliError::Usage(format!(
                "--x0: expected {n} values for {}, got {}",
                problem.name,
                x0.len()
            )))
        }
        Some(x0) => x0.clone(),
        None => problem.x0_default.clone(),
    };
    Ok((problem, x0))
}

fn q_vector(spec: &RunSpec, n: usize) -> Result<Vec<f64>, CliError> {
    match spec.q0.len() {
        1 => Ok(vec![spec.q0[0]; n]),
        len if len == n => Ok(spec.q0.clone()),
        len => Err(CliError::Usage(format!(
            "--q0: expected 1 or {n} values, got {len}"
        ))),
    }
}

/// Runs the solver selected by `spec`.
pub fn run(spec: &RunSpec) -> Result<(Problem, SolveResult), CliError> {
    let (problem, x0) = resolve(spec)?;
    let qs =
        build_schedule(spec.q_schedule, q_vector(spec, problem.n())?, spec.gamma).map_err(usage)?;
    let r = problem.residuals.as_ref();
    let res = match spec.solver {
        SolverKind::Qlm => qlm_solve(r, &x0, &qs, spec.damping, &spec.config),
        SolverKind::Qgn => qgn_solve(r, &x0, &qs, &spec.config),
        SolverKind::Qsd => qsd_solve(r, &x0, &qs, spec.step0, &spec.config),
        SolverKind::LmClassic => lm_classic_solve(r, &x0, spec.damping, &spec.config),
    }?;
    Ok((problem, res))
}

/// Writes the CSV trace. Reals use 17 significant digits.
pub fn write_trace<W: Write>(res: &SolveResult, n: usize, out: &mut W) -> io::Result<()> {
    let mut header = String::from("iter,accepted,lambda,q_min,q_max,sse,grad_norm,step_norm");
    for i in 0..n {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(out, "{header}")?;
    for r in &res.trace {
        let q_min = r.q.iter().copied().fold(f64::INFINITY, f64::min);
        let q_max = r.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        write!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.k, r.accepted as u8, r.lambda, q_min, q_max, r.sse, r.grad_norm, r.step_norm
        )?;
        for v in &r.x {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn save_trace(res: &SolveResult, n: usize, path: &Path) -> Result<(), CliError> {
    let wrap = |source| CliError::TraceWrite {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    write_trace(res, n, &mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

/// Runs `spec`, writes the trace if requested and the summary line to `out`.
/// Returns the exit status implied by the termination reason.
pub fn execute<W: Write>(spec: &RunSpec, out: &mut W) -> Result<i32, CliError> {
    let start = Instant::now();
    let (problem, res) = run(spec)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = &spec.trace_path {
        save_trace(&res, problem.n(), path)?;
    }
    let summary = Summary {
        problem: problem.name.clone(),
        solver: spec.solver.as_str(),
        termination: res.termination.as_str(),
        iterations: res.iterations,
        sse_final: res.sse_final,
        x_final: res.x_final.clone(),
        wall_time_ms,
    };
    let line = serde_json::to_string(&summary).map_err(|e| CliError::Output(e.into()))?;
    writeln!(out, "{line}").map_err(CliError::Output)?;
    Ok(exit_status(res.termination))
}
