use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Resolved};
use crate::geometry::DomainKind;
use crate::pharmonic::{minimize_phase, minimize_phase_with, EnergyQuadrature, PharmonicSolution};
use crate::renorm::{
    fd_grad_w_green, geometric_schedule, grad_w_green, grad_w_phase, renorm_energy_green, renorm_energy_rho_limit,
    solve_linear_singular_problem,
};
use crate::stress::{canonical_coefficients, default_delta};
use crate::vortex::{check_compatibility, circulation, CanonicalMap, CurrentField};
use crate::Result;

/// One row of the invariant table; a check passes when `value <= threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.threshold
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,value,threshold,status\n");
        for c in &self.checks {
            let status = if c.passed() { "pass" } else { "fail" };
            let _ = writeln!(s, "{},{:.16e},{:.16e},{status}", c.name, c.value, c.threshold);
        }
        s
    }

    /// Fixed-width pass/fail table.
    pub fn to_table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<w$}  {:>24}  {:>24}  status\n", "check", "value", "threshold");
        for c in &self.checks {
            let status = if c.passed() { "pass" } else { "FAIL" };
            let _ = writeln!(s, "{:<w$}  {:>24.16e}  {:>24.16e}  {status}", c.name, c.value, c.threshold);
        }
        s
    }
}

fn diff_rel(a: &[f64], b: &[f64]) -> f64 {
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    n(&d) / n(a).max(n(b)).max(1.0)
}

/// `W` on the unit disk for unit degrees and `g = e^{i n theta}`.
pub fn disk_unit_degree_w(points: &[[f64; 2]]) -> f64 {
    let z: Vec<Complex64> = points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let mut w = 0.0;
    for (i, a) in z.iter().enumerate() {
        for (j, b) in z.iter().enumerate() {
            if i != j {
                w -= TAU * (a - b).norm().ln();
            }
            w -= TAU * (1.0 - a * b.conj()).norm().ln();
        }
    }
    w
}

fn exact_disk_applies(cfg: &ExperimentConfig) -> bool {
    let lp = &cfg.datum.loops[0];
    matches!(cfg.domain, DomainKind::UnitDisk)
        && cfg.vortices.iter().all(|v| v.d == 1)
        && lp.winding == cfg.vortices.len() as i64
        && lp.offset == 0.0
        && lp.cos.iter().chain(&lp.sin).all(|c| *c == 0.0)
}

fn circulation_checks(
    out: &mut Vec<Check>,
    tag: &str,
    map: &CanonicalMap,
    phi: Option<&crate::laplace::ScalarField>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let field = match phi {
        Some(phi) => CurrentField::with_correction(map, phi),
        None => CurrentField::canonical(map),
    };
    let clearance = map.config.clearance();
    for (j, (x, d)) in map.config.points().iter().zip(map.config.degrees()).enumerate() {
        let r = clearance * rng.random_range(0.2..0.45);
        let c = circulation(&field, *x, r, 512)?;
        out.push(Check::new(format!("{tag}[{j}]"), (c / TAU - *d as f64).abs(), 1e-3));
    }
    Ok(())
}

/// Runs the invariant suite on one configuration.
pub fn run_suite(cfg: &ExperimentConfig, resolved: &Resolved) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let problem = &resolved.problem;
    let points = cfg.points();
    let map = problem.map_at(&points)?;
    let mesh = map.mesh();

    let chi = mesh.euler_characteristic() as f64;
    let expected = 2.0 - mesh.n_boundary_loops() as f64;
    checks.push(Check::new("mesh_euler_characteristic", (chi - expected).abs(), 0.0));
    checks.push(Check::new("mesh_min_angle_deficit", 20.0 - mesh.min_angle_deg(), 0.0));
    let compat = check_compatibility(&resolved.domain, &cfg.datum, &resolved.config);
    let gap = compat.outer - compat.vortices - compat.inner.iter().sum::<i64>();
    checks.push(Check::new("compatibility_gap", gap.abs() as f64, 0.0));
    circulation_checks(&mut checks, "circulation_canonical", &map, None, &mut rng)?;

    let green = solve_linear_singular_problem(&map)?;
    let w_green = renorm_energy_green(&green)?;
    let r = &cfg.renorm;
    let clearance = map.config.clearance();
    let w_rho = renorm_energy_rho_limit(&map, &geometric_schedule(r.rho_max_rel * clearance, r.rho_ratio, r.rho_count))?;
    let scale = 1.0 + w_green.value.abs();
    checks.push(Check::new("w_rho_vs_green", (w_rho.value - w_green.value).abs() / scale, 1e-2));
    if let Some(b) = &w_green.breakdown {
        let sum = b.pairwise + b.boundary + b.self_term + b.theta;
        checks.push(Check::new("w_breakdown_sum", (sum - w_green.value).abs() / scale, 1e-12));
    }
    if exact_disk_applies(cfg) {
        let exact = disk_unit_degree_w(&points);
        checks.push(Check::new("w_green_vs_exact_disk", (w_green.value - exact).abs() / (1.0 + exact.abs()), 1e-2));
    }
    let g_phase = grad_w_phase(&map)?;
    let g_green = grad_w_green(&green)?;
    let g_fd = fd_grad_w_green(&map, r.fd_rel * clearance)?;
    checks.push(Check::new("grad_phase_vs_green", diff_rel(&g_phase, &g_green), 2e-2));
    checks.push(Check::new("grad_phase_vs_fd", diff_rel(&g_phase, &g_fd), 2e-2));
    checks.push(Check::new("grad_green_vs_fd", diff_rel(&g_green, &g_fd), 2e-2));

    let params = &problem.solver;
    let trivial = minimize_phase(2.0, &map, params)?;
    checks.push(Check::new("p2_phase_max", trivial.phi.max_abs(), 1e-8));
    let deltas = if cfg.stress.deltas.is_empty() { vec![default_delta(&map)] } else { cfg.stress.deltas.clone() };
    for (k, delta) in deltas.iter().enumerate() {
        let c = canonical_coefficients(2.0, &map, *delta)?.flat();
        checks.push(Check::new(format!("stress_p2_vs_grad_phase[{k}]"), diff_rel(&c, &g_phase), 2e-2));
    }

    let quad = Arc::new(EnergyQuadrature::new(&map, &params.rules));
    let mut warm: Option<PharmonicSolution> = None;
    for &p in &cfg.p_schedule {
        let sol = minimize_phase_with(p, &map, quad.clone(), params, warm.as_ref().map(|s| &s.phi))?;
        checks.push(Check::new(format!("energy_below_canonical[{p}]"), sol.energy - sol.energy_zero, 0.0));
        checks.push(Check::new(format!("residual[{p}]"), sol.residual, params.residual_tol));
        circulation_checks(&mut checks, &format!("circulation_p[{p}]"), &map, Some(&sol.phi), &mut rng)?;
        warm = Some(sol);
    }
    if let Some(sol) = &warm {
        let unit = cfg.vortices.iter().all(|v| v.d.abs() == 1);
        if unit && sol.p >= 1.95 {
            let total: f64 = cfg.vortices.iter().map(|v| v.d.abs() as f64).sum();
            let ratio = (2.0 - sol.p) * sol.energy / (TAU * total);
            checks.push(Check::new(format!("blowup_deviation[{}]", sol.p), (ratio - 1.0).abs(), 0.1));
        }
    }
    Ok(ValidationReport { checks })
}
