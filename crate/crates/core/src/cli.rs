//! `hbvm` command line front-end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when the nonlinear solver
//! fails (or a `validate` check does not hold).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HbvmError, Result};
use crate::hamiltonians::{finite_difference_gradient, problem_by_name, CanonicalSystem, PROBLEM_NAMES};
use crate::harness::{convergence_study, drift_experiment, snap_horizon};
use crate::integrator::{integrate, SolverMode, SolverOptions};
use crate::tableau::{fmt17, ButcherTableau};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

const BUILD: &str = match option_env!("HBVM_GIT_DESCRIBE") {
    Some(v) => v,
    None => "unknown",
};

#[derive(Parser, Debug)]
#[command(name = "hbvm", version, about = "Energy-preserving HBVM(k,s) integrators for Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Butcher tableau of HBVM(k,s)
    Tableau(TableauArgs),
    /// Integrate a problem with a constant stepsize
    Integrate(IntegrateArgs),
    /// Estimate the order of convergence by successive halving
    Converge(ConvergeArgs),
    /// Record the energy error along a long run and fit its linear trend
    Drift(DriftArgs),
    /// Run structural checks on a tableau and seeded gradient checks on every problem
    Validate(ValidateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    FixedPoint,
    Newton,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// Number of Lobatto intervals (k+1 stages)
    #[arg(long)]
    k: usize,
    /// Degree of the stage polynomial; order is 2s
    #[arg(long)]
    s: usize,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Nonlinear solver; defaults to newton for fpu, fixed-point otherwise
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TableauArgs {
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    /// Initial state as comma-separated values (q then p)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    h0: f64,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Horizon; rounded down to a whole number of coarse steps
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct DriftArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random states per problem for the gradient check
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[command(flatten)]
    output: OutputArgs,
}

/// Default horizon of a convergence study for each packaged problem.
pub fn default_horizon(problem: &str) -> f64 {
    match problem {
        "fpu" => 1.0,
        "biot" => 30.0,
        "fhp" => 20.0,
        _ => 10.0,
    }
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<HbvmError> for Failure {
    fn from(e: HbvmError) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

/// Runs the CLI with process stdout/stderr and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Tableau(a) => cmd_tableau(a),
        Command::Integrate(a) => cmd_integrate(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Drift(a) => cmd_drift(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok((text, out, code)) => match emit(&text, out, stdout) {
            Ok(()) => code,
            Err(msg) => {
                let _ = writeln!(stderr, "error: {msg}");
                EXIT_USAGE
            }
        },
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Solver(msg)) => {
            let _ = writeln!(stderr, "solver failure: {msg}");
            EXIT_SOLVER
        }
    }
}

type CmdResult = std::result::Result<(String, Option<PathBuf>, i32), Failure>;

fn emit(text: &str, out: Option<PathBuf>, stdout: &mut dyn Write) -> std::result::Result<(), String> {
    match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn load_problem(name: &str) -> std::result::Result<Box<dyn CanonicalSystem>, Failure> {
    problem_by_name(name).map_err(|_| {
        Failure::Usage(format!("unknown problem '{name}' (expected one of {})", PROBLEM_NAMES.join(", ")))
    })
}

fn solver_options(args: &SolverArgs, problem: &str) -> Result<SolverOptions> {
    let mode = match args.solver {
        Some(SolverArg::FixedPoint) => SolverMode::FixedPoint,
        Some(SolverArg::Newton) => SolverMode::NewtonLike,
        None if problem == "fpu" => SolverMode::NewtonLike,
        None => SolverMode::FixedPoint,
    };
    let opts = SolverOptions { mode, tolerance: args.tol, max_iterations: args.max_iter };
    opts.validate()?;
    Ok(opts)
}

fn initial_state(system: &dyn CanonicalSystem, y0: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    match y0 {
        Some(v) if v.len() != system.dim() => Err(HbvmError::Dimension { expected: system.dim(), got: v.len() }),
        Some(v) => Ok(v.clone()),
        None => Ok(system.initial_state()),
    }
}

fn mode_name(opts: &SolverOptions) -> &'static str {
    match opts.mode {
        SolverMode::FixedPoint => "fixed-point",
        SolverMode::NewtonLike => "newton",
    }
}

fn header(method: &MethodArgs, problem: &str, step: &str, horizon: f64, opts: &SolverOptions) -> String {
    format!(
        "# method: HBVM({},{})\n# problem: {problem}\n# {step}\n# horizon: {horizon}\n# solver: {} tol={:e} max_iter={}\n# build: {BUILD}\n",
        method.k,
        method.s,
        mode_name(opts),
        opts.tolerance,
        opts.max_iterations
    )
}

fn cmd_tableau(a: TableauArgs) -> CmdResult {
    let tab = ButcherTableau::hbvm(a.method.k, a.method.s)?;
    let text = match a.format {
        Format::Json => tab.to_json(),
        Format::Csv => tab.to_csv(),
    };
    Ok((text, a.output.out, EXIT_OK))
}

fn cmd_integrate(a: IntegrateArgs) -> CmdResult {
    let system = load_problem(&a.problem)?;
    let tab = ButcherTableau::hbvm(a.method.k, a.method.s)?;
    let opts = solver_options(&a.solver, &a.problem)?;
    let y0 = initial_state(system.as_ref(), &a.y0)?;
    let traj = integrate(&tab, system.as_ref(), &y0, a.h, a.steps, &opts)?;

    let mut text = header(&a.method, &a.problem, &format!("h: {}", a.h), a.steps as f64 * a.h, &opts);
    text.push_str("step,time");
    for i in 1..=system.dim() {
        let _ = write!(text, ",y_{i}");
    }
    text.push_str(",energy_error\n");
    for (n, ((t, y), e)) in traj.times.iter().zip(&traj.states).zip(&traj.energy_error).enumerate() {
        let _ = write!(text, "{n},{t}");
        for v in y {
            let _ = write!(text, ",{}", fmt17(*v));
        }
        let _ = writeln!(text, ",{e:.6e}");
    }
    Ok((text, a.output.out, EXIT_OK))
}

fn cmd_converge(a: ConvergeArgs) -> CmdResult {
    let system = load_problem(&a.problem)?;
    let tab = ButcherTableau::hbvm(a.method.k, a.method.s)?;
    let opts = solver_options(&a.solver, &a.problem)?;
    let y0 = initial_state(system.as_ref(), &a.y0)?;
    if !(a.h0 > 0.0) {
        return Err(Failure::Usage(format!("--h0 must be positive, got {}", a.h0)));
    }
    let requested = a.t_end.unwrap_or_else(|| default_horizon(&a.problem));
    if !(requested > 0.0) {
        return Err(Failure::Usage(format!("--t-end must be positive, got {requested}")));
    }
    let horizon = snap_horizon(requested, a.h0);
    let report = convergence_study(&tab, system.as_ref(), &y0, a.h0, a.levels, horizon, &opts)?;

    let mut text = header(&a.method, &a.problem, &format!("h0: {} levels: {}", a.h0, a.levels), horizon, &opts);
    let _ = writeln!(text, "# requested_horizon: {requested}");
    text.push_str(&report.to_csv());
    Ok((text, a.output.out, EXIT_OK))
}

fn cmd_drift(a: DriftArgs) -> CmdResult {
    let system = load_problem(&a.problem)?;
    let tab = ButcherTableau::hbvm(a.method.k, a.method.s)?;
    let opts = solver_options(&a.solver, &a.problem)?;
    let y0 = initial_state(system.as_ref(), &a.y0)?;
    let report = drift_experiment(&tab, system.as_ref(), &y0, a.h, a.steps, &opts)?;

    let mut text = header(&a.method, &a.problem, &format!("h: {}", a.h), report.horizon(), &opts);
    let _ = writeln!(text, "# slope: {:.6e}", report.slope);
    let _ = writeln!(text, "# max_abs_energy_error: {:.6e}", report.max_abs_deviation);
    text.push_str(&report.to_csv());
    Ok((text, a.output.out, EXIT_OK))
}

fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let (k, s) = (a.method.k, a.method.s);
    let tab = ButcherTableau::hbvm(k, s)?;
    let mut rows: Vec<(String, f64, f64, bool)> = Vec::new();

    let sym = tab.symmetry_residual();
    rows.push(("symmetry_residual".into(), sym, 1e-13, sym <= 1e-13));
    let rank = tab.rank() as f64;
    rows.push(("rank".into(), rank, s as f64, rank == s as f64));
    let orders = tab.simplifying_conditions();
    rows.push(("b_order".into(), orders.b_order as f64, (2 * k) as f64, orders.b_order >= 2 * k));
    rows.push(("c_order".into(), orders.c_order as f64, s as f64, orders.c_order >= s));
    rows.push(("d_order".into(), orders.d_order as f64, (s - 1) as f64, orders.d_order + 1 >= s));
    let mut worst_axis: f64 = 0.0;
    for i in 0..50 {
        let y = 10f64.powf(-2.0 + 5.0 * i as f64 / 49.0);
        let r = tab.stability_function(Complex64::new(0.0, y))?;
        worst_axis = worst_axis.max((r.norm() - 1.0).abs());
    }
    rows.push(("imag_axis_modulus_defect".into(), worst_axis, 1e-10, worst_axis <= 1e-10));

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for name in PROBLEM_NAMES {
        let system = load_problem(name)?;
        let base = system.initial_state();
        let mut worst: f64 = 0.0;
        for _ in 0..a.samples {
            let y: Vec<f64> = base.iter().map(|v| v + rng.gen_range(-0.1..0.1) * (1.0 + v.abs())).collect();
            let analytic = system.gradient(&y)?;
            let eps: f64 = 1e-6 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let fd = finite_difference_gradient(system.as_ref(), &y, eps)?;
            let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = analytic.iter().zip(&fd).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale;
            worst = worst.max(err);
        }
        rows.push((format!("gradient_{name}"), worst, 1e-6, worst <= 1e-6));
    }

    let mut text = format!("# method: HBVM({k},{s})\n# seed: {}\n# build: {BUILD}\n", a.seed);
    text.push_str("check,value,threshold,pass\n");
    let mut all = true;
    for (name, value, threshold, pass) in rows {
        all &= pass;
        let _ = writeln!(text, "{name},{value:e},{threshold:e},{pass}");
    }
    Ok((text, a.output.out, if all { EXIT_OK } else { EXIT_SOLVER }))
}
