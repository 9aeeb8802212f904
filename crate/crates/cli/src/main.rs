//! `mechlab`: single-crossing checks, deterministic price optimization and
//! the LP oracle from the command line.
//!
//! Exit codes: 0 success, 1 the analysis came back negative (a condition
//! fails, a gap exceeds its tolerance), 2 bad input, 3 numerical failure.

mod params;

use std::cell::RefCell;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mechlab_core::lp::{build_lp, build_lp_with, deterministic_gap, solve_lp, Allocation, MAX_GRID};
use mechlab_core::optimizer::{check_necessary_conditions, imv_bundle_price, optimize_deterministic, sweep, Regime};
use mechlab_core::phi::{check_sc, lattice, ConditionSet, PhiEvaluator, ScConfig, Verdict};
use mechlab_core::{Density, DensitySpec, MechError};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const THREADS_VAR: &str = "MECHLAB_THREADS";

#[derive(Parser)]
#[command(name = "mechlab", version, about = "Revenue-optimal mechanisms for two identical units")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the single-crossing conditions on a lattice; exit 1 unless all hold.
    ScCheck(ScCheckArgs),
    /// Find the revenue-maximizing deterministic price pair.
    Optimize(OptimizeArgs),
    /// Solve the LP over all mechanisms on a type grid and compare with the best prices.
    LpVerify(LpVerifyArgs),
    /// Optimize along a parameter range.
    Sweep(SweepArgs),
    /// Optimal bundle price for an increasing-marginal-values density.
    ImvBundle(ImvBundleArgs),
    /// Tabulate Φ on the lattice.
    PhiDump(PhiDumpArgs),
}

#[derive(Args, Serialize, Clone)]
struct DensityArgs {
    /// Built-in family: uniform, ordered-decreasing, conditional-decreasing,
    /// scale-invariant, ordered-increasing, imv-quadratic.
    #[arg(long, required_unless_present = "density_file", conflicts_with = "density_file")]
    family: Option<String>,
    /// Slope of the support boundary.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Base-density parameters, e.g. `g=power alpha=2` or `g1.alpha=2 g2.lambda=1`.
    #[arg(long, num_args = 1..)]
    params: Vec<String>,
    /// JSON density spec.
    #[arg(long)]
    density_file: Option<PathBuf>,
}

#[derive(Args, Serialize, Clone)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Condition {
    Sch,
    Scv,
    Scd,
}

#[derive(Args, Serialize)]
struct ScArgs {
    /// Lattice points per axis.
    #[arg(long = "n", default_value_t = 401)]
    n: usize,
    /// Sign tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Defaults to all three for decreasing marginal values, SC-H otherwise.
    #[arg(long, value_enum, value_delimiter = ',')]
    conditions: Vec<Condition>,
}

#[derive(Args, Serialize)]
struct ScCheckArgs {
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    sc: ScArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct OptimizeArgs {
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    sc: ScArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct LpVerifyArgs {
    #[command(flatten)]
    density: DensityArgs,
    /// Grid points per axis.
    #[arg(long = "n", default_value_t = 15)]
    n: usize,
    /// Largest accepted LP-over-deterministic gap.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Also solve with q1 = q2 forced at every node and report the loss.
    #[arg(long)]
    equal_units: bool,
    /// Write the LP in plain-text form here.
    #[arg(long)]
    lp_file: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    density: DensityArgs,
    /// `a`, or a base-density parameter such as `alpha` or `g1.lambda`.
    #[arg(long)]
    param: String,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long = "n", default_value_t = 31)]
    n: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ImvBundleArgs {
    #[command(flatten)]
    density: DensityArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct PhiDumpArgs {
    #[command(flatten)]
    density: DensityArgs,
    /// Lattice points per axis.
    #[arg(long = "n", default_value_t = 101)]
    n: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<MechError> for Failure {
    fn from(e: MechError) -> Self {
        let code = match e {
            MechError::SolverFailure(_)
            | MechError::Infeasible
            | MechError::Unbounded
            | MechError::DivisionByZero(_)
            | MechError::ZeroDensitySlice(_) => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

/// What a command produced and whether the analysis was positive.
struct Outcome {
    json: Value,
    csv: String,
    default_format: Format,
    positive: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("mechlab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(format!("cannot size the thread pool: {e}")))
}

fn run(command: Command) -> CliResult<bool> {
    let (name, output, outcome) = match command {
        Command::ScCheck(args) => ("sc-check", args.output.clone(), sc_check(&args)?),
        Command::Optimize(args) => ("optimize", args.output.clone(), optimize(&args)?),
        Command::LpVerify(args) => ("lp-verify", args.output.clone(), lp_verify(&args)?),
        Command::Sweep(args) => ("sweep", args.output.clone(), run_sweep(&args)?),
        Command::ImvBundle(args) => ("imv-bundle", args.output.clone(), imv_bundle(&args)?),
        Command::PhiDump(args) => ("phi-dump", args.output.clone(), phi_dump(&args)?),
    };
    let text = match output.format.unwrap_or(outcome.default_format) {
        Format::Json => {
            let mut report = outcome.json;
            report["command"] = json!(name);
            serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"
        }
        Format::Csv => outcome.csv,
    };
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(outcome.positive)
}

fn load_density(args: &DensityArgs) -> CliResult<Density> {
    load_density_with(args, None)
}

/// Builds the density, optionally overriding one parameter (for sweeps).
fn load_density_with(args: &DensityArgs, set: Option<(&str, f64)>) -> CliResult<Density> {
    if !(args.a.is_finite() && args.a > 0.0) {
        return Err(Failure::usage(format!("--a must be positive, got {}", args.a)));
    }
    if let Some(path) = &args.density_file {
        if set.is_some() || !args.params.is_empty() {
            return Err(Failure::usage("--density-file cannot be combined with --params or --param"));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        return Ok(DensitySpec::from_json(&text)?.build()?);
    }
    let kind = args.family.as_deref().expect("clap requires a family without a density file");
    let mut a = args.a;
    let mut raw = args.params.clone();
    match set {
        Some(("a", x)) => a = x,
        Some((key, x)) => {
            raw.retain(|p| params::split(p).map_or(true, |(k, _)| k != key));
            raw.push(format!("{key}={x}"));
        }
        None => {}
    }
    let nested = params::nest(kind, &raw).map_err(Failure::usage)?;
    Ok(DensitySpec::family(kind, a, nested).build()?)
}

/// The fields every JSON report starts with.
fn envelope(config: &impl Serialize, density: &Density) -> Value {
    json!({
        "tool": "mechlab",
        "version": VERSION,
        "config": config,
        "density": density.describe(),
    })
}

fn check_tol(tol: f64) -> CliResult<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--tol must be positive, got {tol}")))
    }
}

fn condition_set(density: &Density, sc: &ScArgs) -> CliResult<(ConditionSet, ScConfig)> {
    check_tol(sc.tol)?;
    if sc.n < 2 {
        return Err(Failure::usage("--n must be at least 2"));
    }
    let which = if sc.conditions.is_empty() {
        if density.domain.is_dmv() {
            ConditionSet::ALL
        } else {
            ConditionSet::SCH
        }
    } else {
        let has = |c| sc.conditions.contains(&c);
        ConditionSet { sch: has(Condition::Sch), scv: has(Condition::Scv), scd: has(Condition::Scd) }
    };
    Ok((which, ScConfig { n: sc.n, tol: sc.tol }))
}

fn verdict_name(v: Option<Verdict>) -> &'static str {
    match v {
        None => "skipped",
        Some(Verdict::Holds) => "holds",
        Some(Verdict::Fails) => "fails",
        Some(Verdict::Inconclusive) => "inconclusive",
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Interior => "interior",
        Regime::SeparateEdge => "separate_edge",
        Regime::Bundle => "bundle",
    }
}

fn sc_check(args: &ScCheckArgs) -> CliResult<Outcome> {
    let density = load_density(&args.density)?;
    let (which, cfg) = condition_set(&density, &args.sc)?;
    let report = check_sc(&density, which, &cfg)?;
    let mut csv = String::from("condition,verdict,max_violation\n");
    for (k, (name, v)) in [("sch", report.sch), ("scv", report.scv), ("scd", report.scd)].into_iter().enumerate() {
        if v.is_some() {
            writeln!(csv, "{name},{},{}", verdict_name(v), report.max_violation[k]).unwrap();
        }
    }
    let mut json = envelope(args, &density);
    let positive = report.all_hold();
    json["holds"] = json!(positive);
    json["result"] = json!(report);
    Ok(Outcome { json, csv, default_format: Format::Json, positive })
}

fn optimize(args: &OptimizeArgs) -> CliResult<Outcome> {
    let density = load_density(&args.density)?;
    let (which, cfg) = condition_set(&density, &args.sc)?;
    let r = optimize_deterministic(&density)?;
    let necessary = match r.regime {
        Regime::Interior => check_necessary_conditions(&density, r.best.p1, r.best.p2).ok(),
        _ => None,
    };
    let sc = check_sc(&density, which, &cfg)?;
    let csv = format!(
        "p1,p2,regime,revenue\n{},{},{},{}\n",
        r.best.p1,
        r.best.p2,
        regime_name(r.regime),
        r.revenue
    );
    let mut json = envelope(args, &density);
    json["result"] = json!({
        "p1": r.best.p1,
        "p2": r.best.p2,
        "regime": r.regime,
        "revenue": r.revenue,
        "foc_residuals": r.foc_residuals,
        "necessary_conditions": necessary,
        "candidates": r.candidates,
        "single_crossing": sc,
    });
    Ok(Outcome { json, csv, default_format: Format::Json, positive: true })
}

fn lp_verify(args: &LpVerifyArgs) -> CliResult<Outcome> {
    check_tol(args.tol)?;
    if args.n < 2 || args.n > MAX_GRID {
        return Err(Failure::usage(format!("--n must lie in [2, {MAX_GRID}], got {}", args.n)));
    }
    let density = load_density(&args.density)?;
    let (gap, sol) = deterministic_gap(&density, args.n)?;
    let inst = build_lp(&density, args.n)?;
    if let Some(path) = &args.lp_file {
        std::fs::write(path, inst.to_lp_text())
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let equal_units = if args.equal_units {
        let eq = solve_lp(&build_lp_with(inst.grid.clone(), Allocation::EqualUnits)?)?;
        Some(json!({"objective": eq.objective, "loss": sol.objective - eq.objective, "max_violation": eq.max_violation}))
    } else {
        None
    };
    let positive = gap.gap <= args.tol && gap.max_violation <= mechlab_core::lp::FEASIBILITY_TOL;
    let mut json = envelope(args, &density);
    json["certified"] = json!(positive);
    json["result"] = json!({
        "gap": gap,
        "constraints": {"ic": inst.counts.ic, "ir": inst.counts.ir, "feasibility": inst.counts.feasibility},
        "feasibility_tolerance": mechlab_core::lp::FEASIBILITY_TOL,
        "equal_units": equal_units,
    });
    Ok(Outcome { json, csv: sol.to_csv(), default_format: Format::Json, positive })
}

fn run_sweep(args: &SweepArgs) -> CliResult<Outcome> {
    if !(args.from.is_finite() && args.to.is_finite()) {
        return Err(Failure::usage("--from and --to must be finite"));
    }
    if args.n < 2 {
        return Err(Failure::usage("--n must be at least 2"));
    }
    // fail on a malformed base spec before the first optimization
    let first = load_density_with(&args.density, Some((&args.param, args.from)))?;
    let bad_input = RefCell::new(None);
    let rows = sweep(args.from, args.to, args.n, |x| {
        load_density_with(&args.density, Some((&args.param, x))).map_err(|f| {
            let message = f.message.clone();
            *bad_input.borrow_mut() = Some(f);
            MechError::InvalidArgument(message)
        })
    });
    if let Some(f) = bad_input.into_inner() {
        return Err(f);
    }
    let rows = rows?;
    let mut csv = String::from("param,p1,p2,regime,revenue\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.param, r.p1, r.p2, regime_name(r.regime), r.revenue).unwrap();
    }
    let mut json = envelope(args, &first);
    json["result"] = json!({ "rows": rows });
    Ok(Outcome { json, csv, default_format: Format::Csv, positive: true })
}

fn imv_bundle(args: &ImvBundleArgs) -> CliResult<Outcome> {
    let density = load_density(&args.density)?;
    let b = imv_bundle_price(&density)?;
    let csv = format!("price,revenue,residual,regular\n{},{},{},{}\n", b.price, b.revenue, b.residual, b.regular);
    let mut json = envelope(args, &density);
    json["result"] = json!(b);
    Ok(Outcome { json, csv, default_format: Format::Json, positive: true })
}

fn phi_dump(args: &PhiDumpArgs) -> CliResult<Outcome> {
    if args.n < 2 {
        return Err(Failure::usage("--n must be at least 2"));
    }
    let density = load_density(&args.density)?;
    let ev = PhiEvaluator::auto(&density)?;
    let s = lattice(args.n);
    let a = density.domain.a;
    let rows: Vec<[f64; 3]> = (0..args.n)
        .into_par_iter()
        .map(|i| {
            let xs: Vec<f64> = s[i..].to_vec();
            let phis = ev.phi_row(a * s[i], &xs);
            xs.into_iter().zip(phis).map(|(x, p)| [x, a * s[i], p]).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat();
    let mut csv = String::from("v1,v2,phi\n");
    for r in &rows {
        writeln!(csv, "{},{},{}", r[0], r[1], r[2]).unwrap();
    }
    let mut json = envelope(args, &density);
    json["result"] = json!({ "lattice": args.n, "rows": rows });
    Ok(Outcome { json, csv, default_format: Format::Csv, positive: true })
}
