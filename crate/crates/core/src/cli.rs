//! Command-line front end. Exit codes: 0 success, 1 numerical failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::catalog::{load_triplet, triplet_names, PeerTriplet};
use crate::conditions::{check_triplet, ConditionReport};
use crate::experiment::{converge, to_csv, to_json, ConvergeMode};
use crate::gradient::evaluate;
use crate::ivp::NewtonOptions;
use crate::optimize::{minimize, OptimizeConfig};
use crate::problems::{Problem, ProblemSpec};
use crate::trajectory::{ControlLayout, Controls, Grid, StageArray};

#[derive(Debug, Parser)]
#[command(name = "peer-ocp", version, about = "Peer triplets for ODE optimal control", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the order, stability and positivity conditions of a triplet.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Forward and adjoint sweep for a fixed control.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Error norms and observed orders over a list of grids.
    #[command(args_override_self = true)]
    Converge(ConvergeArgs),
    /// Minimize the reduced cost.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Optimized,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Read further flags from a `key = value` file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Shorthand for `--format json`.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// quadratic, heat or schlogl.
    #[arg(long, default_value = "quadratic")]
    pub problem: String,
    /// Spatial points of the PDE problems.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    /// Control cost weight of the Schlögl problem.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Triplet name, or `all`.
    #[arg(long, default_value = "all")]
    pub triplet: String,
    #[arg(long, default_value_t = crate::conditions::DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub triplet: String,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of steps N+1.
    #[arg(long, default_value_t = 40)]
    pub nsteps: usize,
    /// zero, ustop or file:<path>.
    #[arg(long, default_value = "zero")]
    pub init: String,
    /// Newton tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Write stage trajectories as CSV.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    /// Triplet name, or `all`.
    #[arg(long, default_value = "all")]
    pub triplet: String,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated step counts N+1.
    #[arg(long, value_delimiter = ',')]
    pub grids: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "optimized")]
    pub mode: Mode,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub grad_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub triplet: String,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 40)]
    pub nsteps: usize,
    /// zero, ustop or file:<path>.
    #[arg(long, default_value = "zero")]
    pub init: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub grad_tol: f64,
    /// Stored correction pairs.
    #[arg(long, default_value_t = 60)]
    pub memory: usize,
    /// Ignore the problem's Hessian diagonal.
    #[arg(long)]
    pub no_precondition: bool,
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Numerical(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Splice flags from `--config <path>` right after the subcommand, ahead of the explicit ones.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (k, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(k + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    if args.len() < 2 {
        return Ok(args);
    }
    let extra = crate::config::load(&path).map_err(usage)?;
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

/// Parse and run; returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> i32 {
    match &e {
        CliError::Usage(m) => eprintln!("error: {m}"),
        CliError::Numerical(m) => eprintln!("numerical failure: {m}"),
    }
    e.code()
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Verify(a) => cmd_verify(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Optimize(a) => cmd_optimize(a),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn format_of(c: &Common, default: Format) -> Format {
    if c.json {
        Format::Json
    } else {
        c.format.unwrap_or(default)
    }
}

fn triplets(name: &str) -> Result<Vec<PeerTriplet>, CliError> {
    if name.eq_ignore_ascii_case("all") {
        Ok(triplet_names().into_iter().map(|n| load_triplet(n).expect("catalog triplet")).collect())
    } else {
        Ok(vec![load_triplet(name).map_err(usage)?])
    }
}

fn build_problem(p: &ProblemArgs, run: Option<(&PeerTriplet, usize)>) -> Result<Problem, CliError> {
    let spec = ProblemSpec { name: p.problem.clone(), m: p.m, lo: p.lo, hi: p.hi, alpha: p.alpha };
    match run {
        Some((t, nplus1)) => spec.build_for(t, nplus1),
        None => spec.build(),
    }
    .map_err(usage)
}

fn verify_text(r: &ConditionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} (r, q) = ({}, {})", r.triplet, r.order[0], r.order[1]);
    for (name, c) in &r.conditions {
        let _ = writeln!(s, "  {name:<20} {:>10.3e}  tol {:>8.1e}  {}", c.residual, c.tol, if c.pass { "ok" } else { "FAIL" });
    }
    for (name, v) in &r.informational {
        let _ = writeln!(s, "  {name:<20} {v:>10.3e}  (informational)");
    }
    for (name, v) in &r.scalars {
        let _ = writeln!(s, "  {name:<20} {v:>10.4}");
    }
    let _ = writeln!(s, "{}", if r.pass { "PASS" } else { "FAIL" });
    s
}

fn cmd_verify(a: VerifyArgs) -> Result<(), CliError> {
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let reports = triplets(&a.triplet)?
        .iter()
        .map(|t| check_triplet(t, a.tol).map_err(numerical))
        .collect::<Result<Vec<_>, _>>()?;
    let text = match format_of(&a.common, Format::Csv) {
        Format::Json if reports.len() == 1 => serde_json::to_string_pretty(&reports[0]).expect("report serializes") + "\n",
        Format::Json => serde_json::to_string_pretty(&reports).expect("report serializes") + "\n",
        Format::Csv if a.common.format.is_some() => {
            let mut s = String::from("triplet,kind,name,value,tol,pass\n");
            for r in &reports {
                for (n, c) in &r.conditions {
                    let _ = writeln!(s, "{},condition,{n},{:e},{:e},{}", r.triplet, c.residual, c.tol, c.pass);
                }
                for (n, v) in &r.informational {
                    let _ = writeln!(s, "{},informational,{n},{v:e},,", r.triplet);
                }
                for (n, v) in &r.scalars {
                    let _ = writeln!(s, "{},scalar,{n},{v},,", r.triplet);
                }
            }
            s
        }
        Format::Csv => reports.iter().map(verify_text).collect(),
    };
    emit(&text, a.common.out.as_deref())?;
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        let failed: Vec<String> =
            reports.iter().flat_map(|r| r.failures().into_iter().map(move |f| format!("{}:{f}", r.triplet))).collect();
        Err(CliError::Numerical(format!("conditions failed: {}", failed.join(", "))))
    }
}

/// Read control values. A file with a `u0,...` header (as written by `--dump`) is read by
/// column, skipping inactive rows; otherwise each numeric row contributes its last `d` numbers.
pub fn read_controls(path: &Path, layout: &Arc<ControlLayout>) -> Result<Controls, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let d = layout.dim();
    let split = |line: &str| -> Vec<String> {
        if line.contains(',') {
            line.split(',').map(|f| f.trim().to_string()).collect()
        } else {
            line.split_whitespace().map(str::to_string).collect()
        }
    };
    let mut columns: Option<(Vec<usize>, Option<usize>)> = None;
    let mut values = Vec::with_capacity(layout.len());
    for line in text.lines() {
        let fields = split(line);
        if fields.iter().all(|f| f.is_empty()) || fields[0].starts_with('#') {
            continue;
        }
        if fields[0].parse::<f64>().is_err() {
            let find = |name: &str| fields.iter().position(|f| f == name);
            let u: Option<Vec<usize>> = (0..d).map(|k| find(&format!("u{k}"))).collect();
            if let Some(u) = u {
                columns = Some((u, find("active")));
            }
            continue;
        }
        let number = |f: &str| f.parse::<f64>().map_err(|_| usage(format!("bad number '{f}' in {}", path.display())));
        match &columns {
            Some((u, active)) => {
                if let Some(a) = active {
                    if fields.get(*a).map(String::as_str) == Some("0") {
                        continue;
                    }
                }
                for &c in u {
                    let f = fields.get(c).ok_or_else(|| usage(format!("short row in {}", path.display())))?;
                    values.push(number(f)?);
                }
            }
            None => {
                if fields.len() < d {
                    return Err(usage(format!("row with {} values, need at least {d}", fields.len())));
                }
                for f in &fields[fields.len() - d..] {
                    values.push(number(f)?);
                }
            }
        }
    }
    if values.len() != layout.len() {
        return Err(usage(format!("{} control values in {}, layout needs {}", values.len(), path.display(), layout.len())));
    }
    Ok(Controls::from_values(layout.clone(), values))
}

fn initial_controls(
    init: &str,
    problem: &Problem,
    t: &PeerTriplet,
    grid: &Grid,
    layout: &Arc<ControlLayout>,
) -> Result<Controls, CliError> {
    let mut u = match init {
        "zero" => Controls::zeros(layout.clone()),
        "ustop" => {
            if problem.stopping_control(0.0).is_none() {
                return Err(usage(format!("--init ustop needs the schlogl problem, got {}", problem.as_dyn().name())));
            }
            Controls::from_fn(layout.clone(), t, grid, |s| problem.stopping_control(s).expect("schlogl"))
        }
        other => match other.strip_prefix("file:") {
            Some(p) => read_controls(Path::new(p), layout)?,
            None => return Err(usage(format!("unknown --init '{other}', expected zero, ustop or file:<path>"))),
        },
    };
    let bounds = problem.as_dyn().bounds();
    if !bounds.contains(u.values()) {
        bounds.project(u.values_mut());
    }
    Ok(u)
}

fn dump_csv(path: &Path, t: &PeerTriplet, grid: &Grid, u: &Controls, y: &StageArray, p: &StageArray) -> Result<(), CliError> {
    let d = u.layout().dim();
    let m = y.dim();
    let mut s = String::from("n,i,t,active");
    (0..d).for_each(|k| write!(s, ",u{k}").unwrap());
    (0..m).for_each(|k| write!(s, ",y{k}").unwrap());
    (0..m).for_each(|k| write!(s, ",p{k}").unwrap());
    s.push('\n');
    for n in 0..grid.steps() {
        for (i, &c) in t.nodes().iter().enumerate() {
            let _ = write!(s, "{n},{i},{:.17e},{}", grid.stage_time(n, c), u.stage(n, i).is_some() as u8);
            match u.stage(n, i) {
                Some(v) => v.iter().for_each(|x| write!(s, ",{x:.17e}").unwrap()),
                None => (0..d).for_each(|_| s.push(',')),
            }
            y.stage(n, i).iter().chain(p.stage(n, i)).for_each(|x| write!(s, ",{x:.17e}").unwrap());
            s.push('\n');
        }
    }
    std::fs::write(path, s).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn aux_adjoint_range(problem: &Problem, p: &StageArray) -> Option<[f64; 2]> {
    let k = problem.as_dyn().auxiliary_index()?;
    let mut r = [f64::INFINITY, f64::NEG_INFINITY];
    for n in 0..p.steps() {
        for i in 0..p.stages() {
            let v = p.stage(n, i)[k];
            r = [r[0].min(v), r[1].max(v)];
        }
    }
    Some(r)
}

fn cmd_solve(a: SolveArgs) -> Result<(), CliError> {
    let t = load_triplet(&a.triplet).map_err(usage)?;
    let problem = build_problem(&a.problem, Some((&t, a.nsteps)))?;
    let prob = problem.as_dyn();
    let grid = Grid::new(a.nsteps, prob.horizon()).map_err(usage)?;
    let layout = Arc::new(ControlLayout::new(&t, &grid, prob.control_dim()));
    let u = initial_controls(&a.init, &problem, &t, &grid, &layout)?;
    let opts = NewtonOptions { tol: a.tol, ..NewtonOptions::default() };
    let r = evaluate(prob, &t, &grid, &u, &opts).map_err(numerical)?;
    let mut summary = json!({
        "problem": prob.name(),
        "triplet": t.name(),
        "Nplus1": a.nsteps,
        "init": a.init,
        "cost": r.cost,
        "grad_norm": r.grad.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        "y_norm": r.y_norm,
        "p_norm": r.p_norm,
        "y_final": crate::ivp::terminal_state(&t, &r.y),
        "p_initial": crate::ivp::initial_adjoint(&t, &r.p),
    });
    if let Some(range) = aux_adjoint_range(&problem, &r.p) {
        summary["aux_adjoint_range"] = json!(range);
    }
    if let Some(reference) = prob.reference() {
        summary["errY"] = json!(reference.state_error(&t, &grid, &r.y));
        summary["errP"] = json!(reference.adjoint_error(&t, &grid, &r.p));
    }
    if let Some(path) = &a.dump {
        dump_csv(path, &t, &grid, &u, &r.y, &r.p)?;
    }
    emit(&(serde_json::to_string_pretty(&summary).expect("json") + "\n"), a.common.out.as_deref())
}

fn cmd_converge(a: ConvergeArgs) -> Result<(), CliError> {
    let problem = build_problem(&a.problem, None)?;
    let prob = problem.as_dyn();
    if prob.reference().is_none() {
        return Err(usage(format!("problem '{}' has no analytic reference for a convergence study", prob.name())));
    }
    let grids = a.grids.clone().unwrap_or_else(|| match prob.name() {
        "heat" => vec![16, 32, 64, 128, 256, 512],
        _ => vec![5, 10, 20, 40],
    });
    if grids.iter().any(|&g| g < 2) {
        return Err(usage("grid sizes must be at least 2"));
    }
    let mode = match a.mode {
        Mode::Exact => ConvergeMode::ExactControl,
        Mode::Optimized => ConvergeMode::Optimized,
    };
    let cfg = OptimizeConfig {
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        newton: NewtonOptions { tol: a.tol, ..NewtonOptions::default() },
        ..OptimizeConfig::default()
    };
    let mut records = Vec::new();
    for t in triplets(&a.triplet)? {
        let rows = converge(prob, &t, &grids, mode, &cfg).map_err(numerical)?;
        for r in rows.iter().filter(|r| !r.converged) {
            eprintln!("warning: {} N+1 = {} stopped before reaching --grad-tol", r.triplet, r.nplus1);
        }
        records.extend(rows);
    }
    let text = match format_of(&a.common, Format::Csv) {
        Format::Csv => to_csv(&records),
        Format::Json => to_json(&records) + "\n",
    };
    emit(&text, a.common.out.as_deref())
}

fn cmd_optimize(a: OptimizeArgs) -> Result<(), CliError> {
    let t = load_triplet(&a.triplet).map_err(usage)?;
    let problem = build_problem(&a.problem, Some((&t, a.nsteps)))?;
    let prob = problem.as_dyn();
    if !(a.grad_tol > 0.0) {
        return Err(usage("--grad-tol must be positive"));
    }
    let grid = Grid::new(a.nsteps, prob.horizon()).map_err(usage)?;
    let layout = Arc::new(ControlLayout::new(&t, &grid, prob.control_dim()));
    let u0 = initial_controls(&a.init, &problem, &t, &grid, &layout)?;
    let cfg = OptimizeConfig {
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        memory: a.memory,
        precondition: !a.no_precondition,
        newton: NewtonOptions { tol: a.tol, ..NewtonOptions::default() },
        ..OptimizeConfig::default()
    };
    let initial_cost = crate::gradient::cost(prob, &t, &grid, &u0, &cfg.newton).map_err(numerical)?;
    let r = minimize(prob, &t, &grid, &u0, &cfg).map_err(numerical)?;
    let mut summary = json!({
        "problem": prob.name(),
        "triplet": t.name(),
        "Nplus1": a.nsteps,
        "init": a.init,
        "initial_cost": initial_cost,
        "cost": r.cost,
        "iterations": r.iterations,
        "evaluations": r.evaluations,
        "wall_time": r.wall_time,
        "grad_norm": r.pg_norm,
        "converged": r.converged,
        "message": r.message,
        "history": r.history,
    });
    if let Some(reference) = prob.reference() {
        let exact = Controls::from_fn(layout.clone(), &t, &grid, |s| reference.control(s));
        let err_u = r.controls.values().iter().zip(exact.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        summary["errU"] = json!(err_u);
        summary["errY"] = json!(reference.state_error(&t, &grid, &r.result.y));
        summary["errP"] = json!(reference.adjoint_error(&t, &grid, &r.result.p));
    }
    if let Some(path) = &a.dump {
        dump_csv(path, &t, &grid, &r.controls, &r.result.y, &r.result.p)?;
    }
    emit(&(serde_json::to_string_pretty(&summary).expect("json") + "\n"), a.common.out.as_deref())?;
    if r.converged {
        Ok(())
    } else {
        Err(CliError::Numerical(r.message))
    }
}
