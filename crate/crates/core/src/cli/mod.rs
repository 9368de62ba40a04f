//! Experiment runner: config parsing, subcommand pipelines and output files.

mod config;
mod validate;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

pub use config::{
    ExperimentConfig, MeshSpec, RenormSpec, Resolved, SolverSpec, StationarySpec, StressSpec, SweepSpec, VortexSpec,
};
pub use validate::{disk_unit_degree_w, run_suite, Check, ValidationReport};

use crate::laplace::NeumannSolver;
use crate::pharmonic::{correction_energy, minimize_phase_with, EnergyQuadrature, PharmonicSolution};
use crate::renorm::{
    fd_grad_w_green, geometric_schedule, grad_w_green, grad_w_phase, green_energy_at, renorm_energy_green,
    renorm_energy_rho_limit, solve_linear_singular_problem,
};
use crate::stationary::{continuation, uniform_convergence_sweep};
use crate::stress::{canonical_coefficients, coefficients, default_delta, delta_report, StressCoefficients};
use crate::vortex::CurrentField;
use crate::{Error, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Graded mesh in ASCII form, with the canonical phase and current.
    Mesh,
    /// Renormalized energy by both methods and its gradient.
    Renorm,
    /// Minimize the p-energy of the phase for every exponent in the schedule.
    Solve,
    /// Stress-energy defect coefficients.
    Stress,
    /// Continuation of stationary configurations toward a critical point of W.
    Stationary,
    /// Grid study of c(p, .) against grad W.
    Sweep,
    /// Full invariant suite with a pass/fail table.
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Renorm => "renorm",
            Command::Solve => "solve",
            Command::Stress => "stress",
            Command::Stationary => "stationary",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pharmlab", version, about = "Singular harmonic maps, renormalized energy and stationary p-harmonic maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Seed for randomized checks; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Solver(Error),
    Validation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Validation(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Solver(e) => write!(f, "solver failure: {e}"),
            Failure::Validation(m) => write!(f, "validation failure: {m}"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn solver<T>(r: crate::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Solver)
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some(config) = cli.config else {
        eprintln!("config error: --config is required");
        return 2;
    };
    let opts = RunOptions { config, out: cli.out, threads: cli.threads, seed: cli.seed };
    match run(cli.command, &opts) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

/// Runs one subcommand; returns the summary block written to `summary.txt`.
pub fn run(command: Command, opts: &RunOptions) -> Outcome<String> {
    let text = fs::read_to_string(&opts.config)
        .map_err(|e| Failure::Config(Error::InvalidConfig(format!("cannot read {}: {e}", opts.config.display()))))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(Failure::Config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    cfg.output_dir = out.to_string_lossy().into_owned();
    let cfg = cfg.resolved();
    let resolved = cfg.validate().map_err(Failure::Config)?;
    fs::create_dir_all(&out).map_err(|e| Failure::Config(e.into()))?;
    write(&out, "config.resolved", &cfg.to_json())?;

    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Config(Error::InvalidConfig(format!("thread pool: {e}"))))?;
    pool.install(|| {
        let mut summary = format!("command = {}\n", command.name());
        let result = match command {
            Command::Mesh => run_mesh(&cfg, &resolved, &out, &mut summary),
            Command::Renorm => run_renorm(&cfg, &resolved, &out, &mut summary),
            Command::Solve => run_solve(&cfg, &resolved, &out, &mut summary),
            Command::Stress => run_stress(&cfg, &resolved, &out, &mut summary),
            Command::Stationary => run_stationary(&cfg, &resolved, &out, &mut summary),
            Command::Sweep => run_sweep(&cfg, &resolved, &out, &mut summary),
            Command::Validate => run_validate(&cfg, &resolved, &out, &mut summary),
        };
        let status = match &result {
            Ok(()) => "ok".to_string(),
            Err(f) => format!("exit {}", f.exit_code()),
        };
        let _ = writeln!(summary, "status = {status}");
        write(&out, "summary.txt", &summary)?;
        result.map(|()| summary)
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome<()> {
    fs::write(dir.join(name), contents).map_err(|e| Failure::Config(e.into()))
}

fn kv(s: &mut String, key: &str, value: f64) {
    let _ = writeln!(s, "{key} = {value:.16e}");
}

fn run_mesh(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let map = solver(r.problem.map_at(&cfg.points()))?;
    let mesh = map.mesh();
    write(out, "mesh.txt", &mesh.to_ascii())?;
    write(out, "canonical_phase.csv", &map.phi.to_csv(mesh))?;
    write(out, "canonical_current.csv", &CurrentField::canonical(&map).to_csv(&r.problem.solver.rules))?;
    let _ = writeln!(s, "vertices = {}", mesh.n_vertices());
    let _ = writeln!(s, "triangles = {}", mesh.n_triangles());
    let _ = writeln!(s, "edges = {}", mesh.n_edges());
    let _ = writeln!(s, "boundary_loops = {}", mesh.n_boundary_loops());
    let _ = writeln!(s, "euler_characteristic = {}", mesh.euler_characteristic());
    kv(s, "min_angle_deg", mesh.min_angle_deg());
    Ok(())
}

fn gradient_csv(rows: &[(&str, &[f64])]) -> String {
    let mut s = String::from("j,method,g1,g2\n");
    for (name, g) in rows {
        for (j, c) in g.chunks(2).enumerate() {
            let _ = writeln!(s, "{j},{name},{:.16e},{:.16e}", c[0], c[1]);
        }
    }
    s
}

fn run_renorm(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let map = solver(r.problem.map_at(&cfg.points()))?;
    let green = solver(solve_linear_singular_problem(&map))?;
    let w_green = solver(renorm_energy_green(&green))?;
    let rs = &cfg.renorm;
    let clearance = map.config.clearance();
    let schedule = geometric_schedule(rs.rho_max_rel * clearance, rs.rho_ratio, rs.rho_count);
    let w_rho = solver(renorm_energy_rho_limit(&map, &schedule))?;
    write(out, "energy.txt", &w_green.to_text())?;
    write(out, "energy_rho.txt", &w_rho.to_text())?;
    let g_phase = solver(grad_w_phase(&map))?;
    let g_green = solver(grad_w_green(&green))?;
    let g_fd = solver(fd_grad_w_green(&map, rs.fd_rel * clearance))?;
    write(out, "gradient.csv", &gradient_csv(&[("phase", &g_phase), ("green", &g_green), ("fd", &g_fd)]))?;
    kv(s, "W_green", w_green.value);
    kv(s, "W_rho", w_rho.value);
    if let Some(b) = &w_green.breakdown {
        kv(s, "pairwise", b.pairwise);
        kv(s, "boundary", b.boundary);
        kv(s, "self", b.self_term);
        kv(s, "theta", b.theta);
        kv(s, "breakdown_sum", b.pairwise + b.boundary + b.self_term + b.theta);
    }
    if rs.grid_k > 0 {
        let ns = solver(NeumannSolver::new(map.mesh()))?;
        let k = rs.grid_k;
        let offsets: Vec<f64> = if k == 1 {
            vec![0.0]
        } else {
            (0..k).map(|i| rs.grid_radius * (2.0 * i as f64 / (k - 1) as f64 - 1.0)).collect()
        };
        let mut csv = String::new();
        for j in 0..cfg.vortices.len() {
            let _ = write!(csv, "x{j}_1,x{j}_2,");
        }
        csv.push_str("W\n");
        for &oy in &offsets {
            for &ox in &offsets {
                let pts: Vec<Point> = cfg.points().iter().map(|q| [q[0] + ox, q[1] + oy]).collect();
                let w = solver(green_energy_at(&map, &pts, &ns))?;
                for q in &pts {
                    let _ = write!(csv, "{:.16e},{:.16e},", q[0], q[1]);
                }
                let _ = writeln!(csv, "{w:.16e}");
            }
        }
        write(out, "w_grid.csv", &csv)?;
    }
    Ok(())
}

/// Warm-started solves over the exponent schedule on one canonical map.
fn solve_schedule(cfg: &ExperimentConfig, r: &Resolved) -> Outcome<Vec<PharmonicSolution>> {
    let map = solver(r.problem.map_at(&cfg.points()))?;
    let params = &r.problem.solver;
    let quad = Arc::new(EnergyQuadrature::new(&map, &params.rules));
    let mut sols: Vec<PharmonicSolution> = Vec::new();
    for &p in &cfg.p_schedule {
        let warm = sols.last().map(|s| &s.phi);
        sols.push(solver(minimize_phase_with(p, &map, quad.clone(), params, warm))?);
    }
    Ok(sols)
}

fn run_solve(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let sols = solve_schedule(cfg, r)?;
    let mut table = String::from("p,energy,energy_zero,correction,phi_max,residual,eps_min\n");
    for (k, sol) in sols.iter().enumerate() {
        write(out, &format!("solve_{k}.csv"), &sol.log_csv())?;
        write(out, &format!("phi_{k}.csv"), &sol.phi.to_csv(sol.map.mesh()))?;
        let _ = writeln!(
            table,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            sol.p,
            sol.energy,
            sol.energy_zero,
            correction_energy(sol),
            sol.phi.max_abs(),
            sol.residual,
            sol.eps_min
        );
        kv(s, &format!("energy[{}]", sol.p), sol.energy);
        kv(s, &format!("blowup_ratio[{}]", sol.p), (2.0 - sol.p) * sol.energy / (std::f64::consts::TAU * total_degree(cfg)));
    }
    write(out, "phases.csv", &table)?;
    Ok(())
}

fn total_degree(cfg: &ExperimentConfig) -> f64 {
    cfg.vortices.iter().map(|v| v.d.abs() as f64).sum()
}

fn run_stress(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let sols = solve_schedule(cfg, r)?;
    let map = &sols[0].map;
    let deltas = if cfg.stress.deltas.is_empty() { vec![default_delta(map)] } else { cfg.stress.deltas.clone() };
    let mut csv = String::from("p,j,c1,c2,delta,err\n");
    let g = solver(grad_w_phase(map))?;
    for (j, c) in g.chunks(2).enumerate() {
        kv(s, &format!("grad_w_phase[{j}].1"), c[0]);
        kv(s, &format!("grad_w_phase[{j}].2"), c[1]);
    }
    let mut emit = |runs: Vec<StressCoefficients>, p: f64, s: &mut String| {
        for run in &runs {
            run.append_csv(&mut csv);
        }
        let rep = delta_report(runs);
        kv(s, &format!("delta_spread[{p}]"), rep.spread);
    };
    let canon: Vec<StressCoefficients> =
        deltas.iter().map(|d| canonical_coefficients(2.0, map, *d)).collect::<crate::Result<_>>().map_err(Failure::Solver)?;
    emit(canon, 2.0, s);
    for sol in &sols {
        let runs: Vec<StressCoefficients> =
            deltas.iter().map(|d| coefficients(sol.p, sol, *d)).collect::<crate::Result<_>>().map_err(Failure::Solver)?;
        kv(s, &format!("cnorm[{}]", sol.p), runs[0].norm());
        emit(runs, sol.p, s);
    }
    write(out, "stress.csv", &csv)?;
    Ok(())
}

fn run_stationary(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let opts = cfg.stationary.options();
    let result = solver(continuation(&r.problem, &cfg.p_schedule, &cfg.points(), &opts))?;
    write(out, "stationary.csv", &result.to_csv())?;
    s.push_str(&result.summary());
    if !(result.converged() && result.certified()) {
        let why = if result.failures.is_empty() { "no certified branch".to_string() } else { result.failures.join("; ") };
        return Err(Failure::Solver(Error::DegreeUndefined(format!("failed to certify: {why}"))));
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let sw = &cfg.sweep;
    let report = solver(uniform_convergence_sweep(&r.problem, &cfg.points(), sw.radius, sw.k, &cfg.p_schedule, sw.delta))?;
    write(out, "sweep.csv", &report.to_csv())?;
    for &p in &cfg.p_schedule {
        kv(s, &format!("max_error[{p}]"), report.max_error(p));
    }
    Ok(())
}

fn run_validate(cfg: &ExperimentConfig, r: &Resolved, out: &Path, s: &mut String) -> Outcome<()> {
    let report = solver(run_suite(cfg, r))?;
    write(out, "validate.csv", &report.to_csv())?;
    s.push_str(&report.to_table());
    let failed = report.failures();
    let _ = writeln!(s, "checks = {}", report.checks.len());
    let _ = writeln!(s, "failed = {}", failed.len());
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        return Err(Failure::Validation(names.join(", ")));
    }
    Ok(())
}
