//! Convex p-energy relaxation: the phase correction `phi` minimizing
//! `int |grad phi + j u_x|^p` over zero-trace functions.

mod energy;

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

pub use energy::EnergyQuadrature;

use crate::geometry::Mesh;
use crate::laplace::{ScalarField, SpdSystem};
use crate::quadrature::{triangle_perp_log_gradient, RuleOptions};
use crate::vortex::CanonicalMap;
use crate::{dot, Error, Point, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    /// Explicit regularization schedule; when empty, a geometric schedule is
    /// derived from the median current magnitude.
    pub eps_schedule: Vec<f64>,
    pub eps_ratio: f64,
    /// Final regularization relative to the median current magnitude.
    pub eps_min_rel: f64,
    pub max_iter: usize,
    pub energy_tol: f64,
    pub residual_tol: f64,
    pub rules: RuleOptions,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            eps_schedule: Vec::new(),
            eps_ratio: 4.0,
            eps_min_rel: 1e-6,
            max_iter: 60,
            energy_tol: 1e-12,
            residual_tol: 1e-6,
            rules: RuleOptions::default(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_tol > 0.0 && self.residual_tol > 0.0) {
            return Err(Error::InvalidConfig("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("iteration cap must be positive".into()));
        }
        if self.eps_schedule.is_empty() {
            if !(self.eps_ratio > 1.0 && self.eps_min_rel > 0.0 && self.eps_min_rel <= 1.0) {
                return Err(Error::BadSchedule("need eps_ratio > 1 and 0 < eps_min_rel <= 1".into()));
            }
        } else if self.eps_schedule.iter().any(|e| !(*e > 0.0))
            || self.eps_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::BadSchedule("regularization schedule must be positive and strictly decreasing".into()));
        }
        Ok(())
    }

    /// Schedule used for a current of median magnitude `scale`.
    pub fn schedule(&self, scale: f64) -> Vec<f64> {
        if !self.eps_schedule.is_empty() {
            return self.eps_schedule.clone();
        }
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let last = self.eps_min_rel * scale;
        let mut out = vec![scale];
        while *out.last().unwrap() / self.eps_ratio > last {
            let e = out.last().unwrap() / self.eps_ratio;
            out.push(e);
        }
        if *out.last().unwrap() > last {
            out.push(last);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEntry {
    pub sweep: usize,
    pub iter: usize,
    pub eps: f64,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct PharmonicSolution {
    pub p: f64,
    pub map: CanonicalMap,
    pub phi: ScalarField,
    /// `F(phi)` at zero regularization.
    pub energy: f64,
    /// `F(0)` at zero regularization.
    pub energy_zero: f64,
    pub log: Vec<LogEntry>,
    /// Scaled Newton decrement at the final regularization.
    pub residual: f64,
    pub eps_min: f64,
    pub quadrature: Arc<EnergyQuadrature>,
}

impl PharmonicSolution {
    /// Gradient of `phi` on each triangle.
    pub fn phi_gradients(&self) -> Vec<Point> {
        let mesh = self.map.mesh();
        (0..mesh.n_triangles()).map(|t| self.phi.gradient(mesh, t)).collect()
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("sweep,iter,eps,energy,residual\n");
        for e in &self.log {
            let _ = writeln!(s, "{},{},{:.16e},{:.16e},{:.16e}", e.sweep, e.iter, e.eps, e.energy, e.residual);
        }
        s
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::BadExponent(p))
    }
}

fn triangle_gradients(mesh: &Mesh, phi: &[f64]) -> Vec<Point> {
    (0..mesh.n_triangles())
        .map(|t| {
            let tri = mesh.triangles[t];
            let g = mesh.basis_gradients(t);
            let mut out = [0.0, 0.0];
            for k in 0..3 {
                out[0] += phi[tri[k]] * g[k][0];
                out[1] += phi[tri[k]] * g[k][1];
            }
            out
        })
        .collect()
}

/// Assembles `sum_T G_T . grad(l_v)` over free vertices.
fn assemble_vector(mesh: &Mesh, system: &SpdSystem, per_triangle: &[Point]) -> Vec<f64> {
    let mut out = vec![0.0; system.n_dofs()];
    for (t, gt) in per_triangle.iter().enumerate() {
        let g = mesh.basis_gradients(t);
        for k in 0..3 {
            if let Some(d) = system.dof(mesh.triangles[t][k]) {
                out[d] += dot(*gt, g[k]);
            }
        }
    }
    out
}

fn scatter(system: &SpdSystem, base: &[f64], step: &[f64], s: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    for (v, d) in system.dofs().iter().enumerate() {
        if let Some(d) = d {
            out[v] += s * step[*d];
        }
    }
    out
}

pub fn minimize_phase(p: f64, map: &CanonicalMap, params: &SolverParams) -> Result<PharmonicSolution> {
    let quad = Arc::new(EnergyQuadrature::new(map, &params.rules));
    minimize_phase_with(p, map, quad, params, None)
}

/// Minimizer starting from `init`, reusing a prebuilt quadrature for `map`.
pub fn minimize_phase_with(
    p: f64,
    map: &CanonicalMap,
    quad: Arc<EnergyQuadrature>,
    params: &SolverParams,
    init: Option<&ScalarField>,
) -> Result<PharmonicSolution> {
    check_exponent(p)?;
    params.validate()?;
    let mesh = map.mesh().clone();
    let system = SpdSystem::new(&mesh, |v| !mesh.is_boundary(v))?;
    let zeros = vec![[0.0, 0.0]; mesh.n_triangles()];
    let energy_zero = quad.energy(p, &zeros);
    if p == 2.0 {
        return solve_quadratic(map, &mesh, &system, quad, energy_zero);
    }
    let mut phi = match init {
        Some(f) if f.values.len() == mesh.n_vertices() => {
            let mut v = f.values.clone();
            for (i, x) in v.iter_mut().enumerate() {
                if mesh.is_boundary(i) {
                    *x = 0.0;
                }
            }
            v
        }
        _ => vec![0.0; mesh.n_vertices()],
    };
    let schedule = params.schedule(quad.median_current());
    let mut log = Vec::new();
    let mut residual = f64::INFINITY;
    let last_sweep = schedule.len() - 1;
    for (sweep, &eps) in schedule.iter().enumerate() {
        let mut converged = false;
        for iter in 0..params.max_iter {
            let g = triangle_gradients(&mesh, &phi);
            let locals = quad.locals(p, eps, &g, true);
            let f: f64 = locals.iter().map(|l| l.energy).sum();
            let grads: Vec<Point> = locals.iter().map(|l| l.grad).collect();
            let rhs = assemble_vector(&mesh, &system, &grads);
            let values = system.assemble(&mesh, |t| {
                let a = 1.0 / mesh.area(t);
                let h = locals[t].hess;
                [[h[0][0] * a, h[0][1] * a], [h[1][0] * a, h[1][1] * a]]
            });
            let factor = system.factor(&values)?;
            let neg: Vec<f64> = rhs.iter().map(|x| -x).collect();
            let step = factor.solve(&neg);
            let slope: f64 = rhs.iter().zip(&step).map(|(a, b)| a * b).sum();
            let decrement = (-slope).max(0.0).sqrt();
            let scale = f.max(1.0);
            residual = decrement / scale.sqrt();
            log.push(LogEntry { sweep, iter, eps, energy: f, residual });
            if 0.5 * decrement * decrement <= params.energy_tol * scale && residual <= params.residual_tol {
                converged = true;
                break;
            }
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let trial = scatter(&system, &phi, &step, s);
                let ft: f64 = quad.locals(p, eps, &triangle_gradients(&mesh, &trial), false).iter().map(|l| l.energy).sum();
                if ft <= f + 1e-4 * s * slope {
                    accepted = Some(trial);
                    break;
                }
                s *= 0.5;
            }
            match accepted {
                Some(trial) => phi = trial,
                None => {
                    // the energy no longer resolves the step: roundoff floor
                    if 0.5 * decrement * decrement <= 1e-10 * scale {
                        converged = true;
                    }
                    break;
                }
            }
        }
        if sweep == last_sweep && !converged {
            return Err(Error::SolverStalled { iterations: log.len(), eps, residual });
        }
    }
    let phi = ScalarField { values: phi };
    let energy = quad.energy(p, &triangle_gradients(&mesh, &phi.values));
    Ok(PharmonicSolution {
        p,
        map: map.clone(),
        phi,
        energy,
        energy_zero,
        log,
        residual,
        eps_min: *schedule.last().unwrap(),
        quadrature: quad,
    })
}

/// At `p = 2` the problem is linear; the load uses exact triangle integrals of the current.
fn solve_quadratic(
    map: &CanonicalMap,
    mesh: &Arc<Mesh>,
    system: &SpdSystem,
    quad: Arc<EnergyQuadrature>,
    energy_zero: f64,
) -> Result<PharmonicSolution> {
    let sources: Vec<(Point, i64)> = map.sources().collect();
    let integrals: Vec<Point> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.corners(t);
            let a = mesh.area(t);
            let g = map.phi_gradient(t);
            let mut out = [a * g[0], a * g[1]];
            for (x, d) in &sources {
                let v = triangle_perp_log_gradient(&tri, *x);
                out[0] += *d as f64 * v[0];
                out[1] += *d as f64 * v[1];
            }
            out
        })
        .collect();
    let load: Vec<f64> = assemble_vector(mesh, system, &integrals).iter().map(|x| -x).collect();
    let values = system.assemble(mesh, |_| crate::laplace::IDENTITY);
    let step = system.factor(&values)?.solve(&load);
    let phi = scatter(system, &vec![0.0; mesh.n_vertices()], &step, 1.0);
    let k = system.apply(&values, &step);
    let residual = k.iter().zip(&load).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let phi = ScalarField { values: phi };
    let energy = quad.energy(2.0, &triangle_gradients(mesh, &phi.values));
    let log = vec![LogEntry { sweep: 0, iter: 0, eps: 0.0, energy, residual }];
    Ok(PharmonicSolution { p: 2.0, map: map.clone(), phi, energy, energy_zero, log, residual, eps_min: 0.0, quadrature: quad })
}

/// `int |grad phi + j u_x|^p` of a solution.
pub fn p_energy(solution: &PharmonicSolution) -> f64 {
    solution.energy
}

/// `int |grad phi|^p`, exact for piecewise linear `phi`.
pub fn correction_energy(solution: &PharmonicSolution) -> f64 {
    let mesh = solution.map.mesh();
    solution
        .phi_gradients()
        .iter()
        .enumerate()
        .map(|(t, g)| dot(*g, *g).powf(0.5 * solution.p) * mesh.area(t))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub p: f64,
    pub correction: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    /// Largest ratio over the smallest.
    pub fn band(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        let min = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn bounded(&self, factor: f64) -> bool {
        self.band() < factor
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,correction,ratio\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.p, r.correction, r.ratio);
        }
        s
    }
}

/// `int |grad phi_p|^p / (2 - p)` along an increasing list of exponents, warm started.
pub fn correction_scaling_report(p_list: &[f64], map: &CanonicalMap, params: &SolverParams) -> Result<ScalingReport> {
    if p_list.iter().any(|p| !(*p > 1.0 && *p < 2.0)) {
        return Err(Error::BadExponent(*p_list.iter().find(|p| !(**p > 1.0 && **p < 2.0)).unwrap()));
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadSchedule("exponents must increase".into()));
    }
    let quad = Arc::new(EnergyQuadrature::new(map, &params.rules));
    let mut rows = Vec::new();
    let mut prev: Option<ScalarField> = None;
    for &p in p_list {
        let sol = minimize_phase_with(p, map, quad.clone(), params, prev.as_ref())?;
        let c = correction_energy(&sol);
        rows.push(ScalingRow { p, correction: c, ratio: c / (2.0 - p) });
        prev = Some(sol.phi);
    }
    Ok(ScalingReport { rows })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use proptest::prelude::*;

    use super::*;
    use crate::geometry::{build_mesh, BoundaryDatum, Domain};
    use crate::vortex::{build_canonical_map, circulation, CurrentField, VortexConfig};

    fn disk_map(points: Vec<Point>, degrees: Vec<i64>, g: BoundaryDatum, h: f64) -> CanonicalMap {
        let d = Domain::unit_disk();
        let c = VortexConfig::new(&d, points, degrees).unwrap();
        let mesh = Arc::new(build_mesh(&d, c.points(), h, h / 20.0).unwrap());
        build_canonical_map(&d, &g, &c, mesh).unwrap()
    }

    #[test]
    fn rejects_bad_exponents() {
        let m = disk_map(vec![[0.0, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.3);
        for p in [1.0, 0.5, 2.1, f64::NAN] {
            assert!(matches!(minimize_phase(p, &m, &SolverParams::default()), Err(Error::BadExponent(_))));
        }
    }

    #[test]
    fn quadratic_case_is_trivial() {
        let m = disk_map(vec![[0.3, 0.1]], vec![1], BoundaryDatum::uniform(1), 0.15);
        let s = minimize_phase(2.0, &m, &SolverParams::default()).unwrap();
        assert!(s.phi.max_abs() < 1e-8, "{}", s.phi.max_abs());
        assert!(s.energy.is_infinite() && s.energy_zero.is_infinite());
    }

    #[test]
    fn vortex_free_quadratic_energy_is_finite() {
        let m = disk_map(vec![], vec![], BoundaryDatum::uniform(0), 0.2);
        let s = minimize_phase(2.0, &m, &SolverParams::default()).unwrap();
        assert!(s.phi.max_abs() < 1e-8);
        assert!(s.energy.is_finite() && s.energy.abs() < 1e-20, "{}", s.energy);
    }

    #[test]
    fn centered_vortex_needs_no_correction() {
        let m = disk_map(vec![[0.0, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.15);
        let s = minimize_phase(1.9, &m, &SolverParams::default()).unwrap();
        assert!(s.phi.max_abs() < 1e-4, "{}", s.phi.max_abs());
        let blow = (2.0 - 1.9) * p_energy(&s) / TAU;
        assert!((0.9..=1.1).contains(&blow), "{blow}");
    }

    #[test]
    fn off_center_lowers_energy() {
        let m = disk_map(vec![[0.3, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.15);
        let s = minimize_phase(1.9, &m, &SolverParams::default()).unwrap();
        assert!(s.energy < s.energy_zero, "{} {}", s.energy, s.energy_zero);
        assert!(s.phi.max_abs() > 1e-6);
        for e in s.log.windows(2) {
            if e[0].sweep == e[1].sweep {
                assert!(e[1].energy <= e[0].energy + 1e-12 * e[0].energy.abs());
            }
        }
        assert!(s.residual < 1e-6);
        for v in 0..m.mesh().n_vertices() {
            if m.mesh().is_boundary(v) {
                assert_eq!(s.phi.values[v], 0.0);
            }
        }
        let field = CurrentField::with_correction(&m, &s.phi);
        for r in [0.05, 0.2] {
            let c = circulation(&field, [0.3, 0.0], r, 512).unwrap();
            assert!((c / TAU - 1.0).abs() < 1e-3, "{c}");
        }
    }

    #[test]
    fn schedule_independence() {
        let m = disk_map(vec![[0.3, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.2);
        let quad = Arc::new(EnergyQuadrature::new(&m, &RuleOptions::default()));
        let a = minimize_phase_with(1.9, &m, quad.clone(), &SolverParams::default(), None).unwrap();
        let params = SolverParams { eps_ratio: 16.0, ..SolverParams::default() };
        let b = minimize_phase_with(1.9, &m, quad, &params, None).unwrap();
        assert!((a.energy - b.energy).abs() < 1e-10 * a.energy.max(1.0), "{} {}", a.energy, b.energy);
    }

    #[test]
    fn blow_up_improves_toward_two() {
        let m = disk_map(vec![[0.0, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.2);
        let quad = Arc::new(EnergyQuadrature::new(&m, &RuleOptions::default()));
        let e = |p: f64| {
            let s = minimize_phase_with(p, &m, quad.clone(), &SolverParams::default(), None).unwrap();
            ((2.0 - p) * s.energy / TAU - 1.0).abs()
        };
        assert!(e(1.95) < e(1.9));
    }

    #[test]
    fn schedule_validation() {
        let bad = SolverParams { eps_schedule: vec![1.0, 2.0], ..SolverParams::default() };
        assert!(matches!(bad.validate(), Err(Error::BadSchedule(_))));
        let s = SolverParams::default().schedule(2.0);
        assert_eq!(s[0], 2.0);
        assert!((s.last().unwrap() - 2e-6).abs() < 1e-18);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn energy_is_convex(seed_a in prop::collection::vec(-1.0f64..1.0, 8), seed_b in prop::collection::vec(-1.0f64..1.0, 8)) {
            thread_local! {
                static SETUP: (CanonicalMap, EnergyQuadrature) = {
                    let m = disk_map(vec![[0.2, -0.1]], vec![1], BoundaryDatum::uniform(1), 0.3);
                    let q = EnergyQuadrature::new(&m, &RuleOptions::default());
                    (m, q)
                };
            }
            SETUP.with(|(m, q)| {
                let mesh = m.mesh();
                let field = |s: &[f64]| -> Vec<f64> {
                    mesh.vertices.iter().enumerate().map(|(v, x)| {
                        if mesh.is_boundary(v) { 0.0 } else {
                            s[0] + s[1] * x[0] + s[2] * x[1] + s[3] * x[0] * x[1] + s[4] * (3.0 * x[0]).sin()
                                + s[5] * (2.0 * x[1]).cos() + s[6] * x[0] * x[0] + s[7] * x[1] * x[1]
                        }
                    }).collect()
                };
                let (a, b) = (field(&seed_a), field(&seed_b));
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                for p in [1.5, 1.9, 2.0] {
                    let f = |u: &[f64]| q.energy(p, &triangle_gradients(mesh, u));
                    let (fa, fb, fm) = (f(&a), f(&b), f(&mid));
                    prop_assert!(fm <= 0.5 * (fa + fb) + 1e-10 * (fa + fb), "p={} {} {} {}", p, fm, fa, fb);
                }
                Ok(())
            })?;
        }
    }
}
