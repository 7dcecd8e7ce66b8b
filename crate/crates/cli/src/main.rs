//! `dpw`: graph checks, solves, meshing, self-check suites and the neck experiment.
//!
//! Exit codes: 0 success, 1 i/o, 2 parse or usage, 3 precondition
//! (unbalanced, degenerate, bad run configuration), 4 numerical failure,
//! 5 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpw_core::graph::{WeightedGraph, BALANCE_TOL};
use dpw_core::monodromy::{log_grid, neck_limit, newton_solve, sample_family, Solution, SolveOptions};
use dpw_core::potentials::{EPS, EPS_PRIME};
use dpw_core::suites::{run_suite, Suite, DEFAULT_CASES};
use dpw_core::surface::{diagnose, immerse, MeshOptions};

/// Thread count for the worker pool.
const THREADS_VAR: &str = "DPW_THREADS";

#[derive(Parser)]
#[command(name = "dpw", version, about = "Constant mean curvature one surfaces from balanced planar graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a graph file.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Solve the closing conditions at one t and write the state.
    Solve {
        /// Graph JSON.
        file: PathBuf,
        /// Neck parameter; 0 gives the union of unit spheres.
        #[arg(long = "t", allow_negative_numbers = true)]
        t: f64,
        /// Fourier modes per loop unknown.
        #[arg(long, default_value_t = 12)]
        modes: usize,
        /// Outer radius of the loop annulus.
        #[arg(long, default_value_t = 1.2)]
        rho: f64,
        /// Sup-norm residual at convergence.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 30)]
        max_iter: usize,
        /// Largest acceptable weighted tail of the residual loops.
        #[arg(long, default_value_t = 1e-6)]
        tail: f64,
        /// State JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mesh a solved state as Wavefront OBJ.
    Mesh {
        state: PathBuf,
        /// Columns of each sphere grid (multiple of 4, at least 8).
        #[arg(long, default_value_t = 48)]
        res: usize,
        /// Fourier modes used for the pointwise Iwasawa splitting.
        #[arg(long, default_value_t = 24)]
        modes: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the diagnostic report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the seeded self-check suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CASES)]
        cases: usize,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence of the plumbing-neck transport as the neck closes.
    Neck {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-5)]
        t_min: f64,
        #[arg(long, default_value_t = 13)]
        points: usize,
    },
}

#[derive(Subcommand)]
enum GraphAction {
    /// Forces, balance, non-degeneracy rank and pre-embeddedness.
    Check { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Wiener,
    Loop,
    Potential,
    Monodromy,
    Surface,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Wiener => vec![Suite::Wiener],
            SuiteArg::Loop => vec![Suite::Loop],
            SuiteArg::Potential => vec![Suite::Potential],
            SuiteArg::Monodromy => vec![Suite::Monodromy],
            SuiteArg::Surface => vec![Suite::Surface],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

/// A run configuration that violates a guard.
#[derive(Debug)]
struct Precondition(String);

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Precondition {}

/// Some suites failed.
#[derive(Debug)]
struct VerifyFailed(Vec<&'static str>);

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed in: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerifyFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use dpw_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) => 1,
                E::Json(_) | E::InvalidGraph(_) | E::LayoutMismatch(_) => 2,
                E::NotBalanced(_) | E::Degenerate { .. } | E::NotATree | E::InvalidParameter(_) => 3,
                _ => 4,
            };
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
        if cause.is::<serde_json::Error>() {
            return 2;
        }
        if cause.is::<Precondition>() {
            return 3;
        }
        if cause.is::<VerifyFailed>() {
            return 5;
        }
    }
    4
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_json(v: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn load_graph(path: &Path) -> Result<WeightedGraph> {
    let text = read(path)?;
    WeightedGraph::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// N ≥ 4, ρ > 1, 0 ≤ t < ε²·min τ over the edges (the central gluing ratios).
fn check_run_config(graph: &WeightedGraph, t: f64, modes: usize, rho: f64, tol: f64) -> Result<()> {
    let fail = |m: String| Err(Precondition(m).into());
    if modes < 4 {
        return fail(format!("--modes must be at least 4, got {modes}"));
    }
    if !(rho > 1.0 && rho.is_finite()) {
        return fail(format!("--rho must exceed 1, got {rho}"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return fail(format!("--tol must be positive, got {tol}"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return fail(format!("--t must be a finite number ≥ 0, got {t}"));
    }
    let min_w = graph.edges.iter().map(|e| e.weight).fold(f64::INFINITY, f64::min);
    if min_w.is_finite() && t >= EPS * EPS * min_w {
        return fail(format!("--t = {t} must stay below ε²·min weight = {}", EPS * EPS * min_w));
    }
    Ok(())
}

fn graph_check(file: &Path) -> Result<()> {
    let g = load_graph(file)?;
    let forces: Vec<[f64; 2]> = g.forces().iter().map(|f| [f.re, f.im]).collect();
    let report = json!({
        "vertices": g.vertices.len(),
        "edges": g.edges.len(),
        "rays": g.rays.len(),
        "forces": forces,
        "max_force": g.max_force(),
        "balanced": g.is_balanced(BALANCE_TOL),
        "nondegeneracy": g.nondegeneracy(),
        "pre_embedded": g.pre_embedded(),
        "tree": g.is_tree(),
    });
    print!("{}", to_json(&report)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(file: &Path, t: f64, modes: usize, rho: f64, tol: f64, max_iter: usize, tail: f64, out: &Path) -> Result<()> {
    let g = load_graph(file)?;
    check_run_config(&g, t, modes, rho, tol)?;
    let opts = SolveOptions { modes, rho, tol, max_iter, tail_threshold: tail, ..SolveOptions::default() };
    let sol = newton_solve(&g, t, &opts)?;
    write(out, &(sol.to_json()? + "\n"))?;
    eprintln!("solved t={t} in {} iterations, residual {:.3e}", sol.newton_iterations, sol.residual);
    Ok(())
}

fn mesh(state: &Path, res: usize, modes: usize, out: &Path, report: Option<&Path>) -> Result<()> {
    let sol = Solution::from_json(&read(state)?).with_context(|| format!("parsing {}", state.display()))?;
    if modes < 4 {
        return Err(Precondition(format!("--modes must be at least 4, got {modes}")).into());
    }
    let opts = MeshOptions { columns: res, modes, ..MeshOptions::default() };
    let imm = immerse(&sol, &opts)?;
    write(out, &imm.mesh.to_obj())?;
    if let Some(path) = report {
        write(path, &to_json(&diagnose(&sol, &imm)?)?)?;
    }
    eprintln!("{} vertices, {} faces", imm.mesh.positions.len(), imm.mesh.n_faces());
    Ok(())
}

fn verify(which: SuiteArg, seed: u64, cases: usize, out: Option<&Path>) -> Result<()> {
    if cases == 0 {
        return Err(Precondition("--cases must be positive".into()).into());
    }
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for s in which.suites() {
        let r = run_suite(s, seed, cases)?;
        eprintln!("{:<10} {} ({:.1} s)", s.name(), if r.passed() { "pass" } else { "FAIL" }, r.seconds);
        if !r.passed() {
            failed.push(s.name());
        }
        reports.push(r);
    }
    let text = to_json(&json!({ "seed": seed, "cases": cases, "passed": failed.is_empty(), "suites": reports }))?;
    match out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(VerifyFailed(failed).into())
    }
}

fn neck(out: &Path, t_max: f64, t_min: f64, points: usize) -> Result<()> {
    if !(0.0 < t_min && t_min < t_max && t_max < EPS_PRIME * EPS_PRIME) || points < 2 {
        return Err(Precondition(format!("need 0 < t-min < t-max < {} and at least 2 points", EPS_PRIME * EPS_PRIME)).into());
    }
    let (b, c) = sample_family();
    let r = neck_limit(&b, &c, EPS_PRIME, &log_grid(t_max, t_min, points))?;
    write(out, &to_json(&r)?)?;
    eprintln!("fitted exponent {:.3}", r.exponent);
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Precondition(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Precondition(format!("{THREADS_VAR} must be a positive integer, got 0")).into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Graph { action: GraphAction::Check { file } } => graph_check(&file),
        Command::Solve { file, t, modes, rho, tol, max_iter, tail, out } => solve(&file, t, modes, rho, tol, max_iter, tail, &out),
        Command::Mesh { state, res, modes, out, report } => mesh(&state, res, modes, &out, report.as_deref()),
        Command::Verify { suite, seed, cases, out } => verify(suite, seed, cases, out.as_deref()),
        Command::Neck { out, t_max, t_min, points } => neck(&out, t_max, t_min, points),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
