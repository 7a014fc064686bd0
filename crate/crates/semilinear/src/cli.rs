//! The `semilinear` command line.
//!
//! Exit codes: 0 success, 2 validation or I/O error, 3 solver
//! non-convergence, 4 no existence certificate or unbounded trace.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semilinear_core::conditions::{self, ConditionOptions, ConditionsError};
use semilinear_core::degree::{DegreeOptions, GalerkinLadder};
use semilinear_core::solver::{self, PerturbedProblem, SolveReport, Strategy};
use semilinear_core::spectral::{self, SpaceSplit, SplitSummary};
use serde::Serialize;

use crate::problem::{self, Problem, ProblemSpec, SpecError};
use crate::report::{self, SweepRow, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_NO_CERTIFICATE, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "semilinear", version, about = "Semilinear equations Lu + N(u) = h at resonance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the spectral split of the operator.
    Decompose(DecomposeArgs),
    /// Check the sufficient conditions of an existence theorem.
    Verify(VerifyArgs),
    /// Solve by continuation in eps.
    Solve(SolveArgs),
    /// Solve a batch of problems and seeds in parallel.
    Sweep(SweepArgs),
    /// Galerkin degree certificate of the perturbed equation.
    Degree(DegreeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Monotone,
    Degree,
    Newton,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Monotone => Strategy::MonotoneInversion,
            StrategyArg::Degree => Strategy::GalerkinDegree,
            StrategyArg::Newton => Strategy::DampedNewton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TheoremArg {
    Ch2,
    Ch3,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    emit: Emit,
}

#[derive(Debug, Default, Args)]
struct Overrides {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps_start: Option<f64>,
    #[arg(long)]
    eps_factor: Option<f64>,
    #[arg(long)]
    eps_steps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
}

impl Overrides {
    fn apply(&self, spec: &mut ProblemSpec) {
        if let Some(d) = self.delta {
            spec.delta = Some(d);
        }
        let s = &mut spec.solver;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.eps_start {
            s.eps_start = v;
        }
        if let Some(v) = self.eps_factor {
            s.eps_factor = v;
        }
        if let Some(v) = self.eps_steps {
            s.eps_steps = v;
        }
        if let Some(v) = self.tol {
            s.tol = v;
        }
        if let Some(v) = self.strategy {
            s.strategy = Some(v.into());
        }
    }
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    theorem: TheoremArg,
    /// Cocoercivity constant; defaults to the declared one.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Problem files, repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Comma-separated seeds; each input runs once per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct DegreeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Perturbation parameter; defaults to the first schedule value.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INVALID, message: message.to_string() }
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::invalid(e)
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Verify(a) => verify(a),
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Degree(a) => degree(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => problem::write_text(p, text).map_err(Failure::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::invalid(format!("cannot write stdout: {e}")))
        }
    }
}

fn split_of(p: &Problem) -> Result<SpaceSplit, Failure> {
    let dec = spectral::eigendecompose(&p.operator).map_err(Failure::invalid)?;
    match p.delta {
        Some(d) => spectral::decompose_space(&dec, d).map_err(Failure::invalid),
        None => Ok(spectral::decompose_space_auto(&dec)),
    }
}

fn load(input: &Path, delta: Option<f64>) -> Result<(ProblemSpec, Problem), Failure> {
    let mut spec = problem::load_problem(input)?;
    if delta.is_some() {
        spec.delta = delta;
    }
    let p = spec.build()?;
    Ok((spec, p))
}

fn decompose(a: DecomposeArgs) -> Result<i32, Failure> {
    let (_, p) = load(&a.input, a.delta)?;
    let summary: SplitSummary = split_of(&p)?.summary();
    let text = match a.output.emit {
        Emit::Json => problem::to_canonical_json(&summary),
        Emit::Csv => report::eigen_csv(&summary),
    };
    eprintln!("s = {}, gamma = {}, delta = {}, |K| = {}", summary.s, summary.gamma, summary.delta, summary.k_norm);
    emit(&text, a.output.out.as_deref())?;
    Ok(EXIT_OK)
}

fn verify(a: VerifyArgs) -> Result<i32, Failure> {
    let (spec, p) = load(&a.input, a.delta)?;
    let split = split_of(&p)?;
    let seed = a.seed.unwrap_or(spec.solver.seed);
    let opts = ConditionOptions::default().with_seed(seed);
    let result = match a.theorem {
        TheoremArg::Ch2 => conditions::check_ch2(&split, p.map.as_ref(), &p.h, &opts),
        TheoremArg::Ch3 => {
            let alpha = a
                .alpha
                .or_else(|| p.map.declared_class().cocoercivity())
                .ok_or_else(|| Failure::invalid("--alpha is required: the nonlinearity declares no cocoercivity"))?;
            conditions::check_ch3(&split, p.map.as_ref(), &p.h, alpha, &opts)
        }
    };
    let rep = result.map_err(|e| match e {
        ConditionsError::AlphaTooSmall { alpha, bound } => {
            Failure::invalid(format!("alpha = {alpha} <= gamma/delta^2 = {bound}"))
        }
        e => Failure::invalid(e),
    })?;
    emit(&problem::to_canonical_json(&rep), a.out.as_deref())?;
    if rep.passed() {
        Ok(EXIT_OK)
    } else {
        for (name, v) in [("i", &rep.condition_i), ("ii", &rep.condition_ii), ("iii", &rep.condition_iii)] {
            if !v.passed {
                eprintln!("condition ({name}) failed: margin {}", v.margin);
            }
        }
        Ok(EXIT_NO_CERTIFICATE)
    }
}

fn run_solve(spec: &ProblemSpec) -> Result<SolveReport, Failure> {
    let p = spec.build()?;
    let mut rep = solver::solve(&p.operator, p.map.as_ref(), &p.h, &p.config).map_err(Failure::invalid)?;
    rep.config_hash = report::config_hash(&spec.to_json(), "solve");
    Ok(rep)
}

fn solve(a: SolveArgs) -> Result<i32, Failure> {
    let mut spec = problem::load_problem(&a.input)?;
    a.overrides.apply(&mut spec);
    let rep = run_solve(&spec)?;
    let text = match a.output.emit {
        Emit::Json => problem::to_canonical_json(&rep),
        Emit::Csv => report::trace_csv(&rep),
    };
    emit(&text, a.output.out.as_deref())?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("status: {}, residual {:e}", report::status_name(rep.status), rep.residual);
    Ok(report::status_exit_code(rep.status))
}

#[derive(Debug, Serialize)]
struct SweepOutput {
    rows: Vec<SweepRow>,
    reports: Vec<Option<SolveReport>>,
}

type SweepResult = (SweepRow, Option<SolveReport>);

fn sweep(a: SweepArgs) -> Result<i32, Failure> {
    let mut runs = Vec::new();
    for input in &a.input {
        let mut spec = problem::load_problem(input)?;
        a.overrides.apply(&mut spec);
        let seeds = if a.seeds.is_empty() { vec![spec.solver.seed] } else { a.seeds.clone() };
        for seed in seeds {
            let mut s = spec.clone();
            s.solver.seed = seed;
            runs.push((input.display().to_string(), s));
        }
    }
    let jobs = a.jobs.max(1).min(runs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepResult>>> = Mutex::new(vec![None; runs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((input, spec)) = runs.get(i) else { break };
                let out = match run_solve(spec) {
                    Ok(rep) => (SweepRow::from_report(input.clone(), spec.solver.seed, &rep), Some(rep)),
                    Err(f) => (
                        SweepRow {
                            input: input.clone(),
                            seed: spec.solver.seed,
                            status: String::from("invalid"),
                            exit_code: f.code,
                            residual: None,
                            steps: 0,
                            final_eps: None,
                            norm: None,
                            error: Some(f.message),
                        },
                        None,
                    ),
                };
                results.lock().expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });
    let (rows, reports): (Vec<_>, Vec<_>) = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every run completes"))
        .unzip();
    let code = rows.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK);
    let text = match a.output.emit {
        Emit::Json => problem::to_canonical_json(&SweepOutput { rows, reports }),
        Emit::Csv => report::sweep_csv(&rows),
    };
    emit(&text, a.output.out.as_deref())?;
    Ok(code)
}

#[derive(Debug, Serialize)]
struct DegreeOutput {
    eps: f64,
    radius: f64,
    ladder: GalerkinLadder,
    stabilized_degree: Option<i64>,
}

fn degree(a: DegreeArgs) -> Result<i32, Failure> {
    let (spec, p) = load(&a.input, a.delta)?;
    let split = split_of(&p)?;
    let eps = a.eps.unwrap_or(spec.solver.eps_start);
    let pp = PerturbedProblem::new(&split, p.map.as_ref(), p.h.clone(), eps, Strategy::GalerkinDegree)
        .map_err(Failure::invalid)?;
    let seed = a.seed.unwrap_or(spec.solver.seed);
    let opts = DegreeOptions { seed, ..Default::default() };
    let radius = solver::radius_bound(&p.h, eps, &split, p.map.growth());
    let ladder = solver::galerkin_certificate(&pp, &opts)
        .map_err(|e| Failure { code: EXIT_NONCONVERGENCE, message: e.to_string() })?
        .ok_or_else(|| Failure::invalid("no finite radius bound: the nonlinearity needs bounded or sublinear growth"))?;
    let stabilized = ladder.stabilized_degree().ok();
    emit(
        &problem::to_canonical_json(&DegreeOutput { eps, radius, ladder, stabilized_degree: stabilized }),
        a.out.as_deref(),
    )?;
    Ok(match stabilized {
        Some(0) => {
            eprintln!("degree stabilized at 0: no existence certificate");
            EXIT_NO_CERTIFICATE
        }
        Some(d) => {
            eprintln!("degree stabilized at {d}");
            EXIT_OK
        }
        None => {
            eprintln!("degree ladder did not stabilize");
            EXIT_NONCONVERGENCE
        }
    })
}
