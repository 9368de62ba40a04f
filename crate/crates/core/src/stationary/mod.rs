//! Stationary configurations: Brouwer degree certificates, critical points
//! of the renormalized energy and continuation of stationary p-harmonic maps.

mod degree;

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use faer::Mat;

pub use degree::{brouwer_degree, DegreeCertificate};

use crate::geometry::{build_mesh_with, BoundaryDatum, Domain, Mesh, MeshOptions};
use crate::laplace::ScalarField;
use crate::pharmonic::{minimize_phase_with, EnergyQuadrature, SolverParams};
use crate::renorm::grad_w_phase;
use crate::stress::coefficients;
use crate::vortex::{build_canonical_map, transport_config, CanonicalMap, VortexConfig};
use crate::{Error, Point, Result};

/// Domain, boundary datum, degrees and discretization shared by all configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub domain: Domain,
    pub datum: BoundaryDatum,
    pub degrees: Vec<i64>,
    pub mesh: MeshOptions,
    pub solver: SolverParams,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn config(&self, points: &[Point]) -> Result<VortexConfig> {
        VortexConfig::new(&self.domain, points.to_vec(), self.degrees.clone())
    }

    /// Whether `x1 -> -x1` maps the configuration, domain and datum to themselves.
    pub fn is_mirror_symmetric(&self, points: &[Point]) -> bool {
        self.domain.is_mirror_symmetric()
            && self.datum.is_mirror_symmetric()
            && points.iter().all(|p| p[0].abs() > 1e-12)
            && points.iter().zip(&self.degrees).all(|(p, d)| {
                points
                    .iter()
                    .zip(&self.degrees)
                    .any(|(q, e)| d == e && (p[0] + q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12)
            })
    }

    pub fn mesh_for(&self, points: &[Point]) -> Result<Arc<Mesh>> {
        let opts = self.mesh.clone().mirrored(self.mesh.mirror || self.is_mirror_symmetric(points));
        Ok(Arc::new(build_mesh_with(&self.domain, points, &opts)?))
    }

    /// Canonical map on a mesh graded at `points`.
    pub fn map_at(&self, points: &[Point]) -> Result<CanonicalMap> {
        let config = self.config(points)?;
        build_canonical_map(&self.domain, &self.datum, &config, self.mesh_for(points)?)
    }

    /// `W` is constant along rotations about the origin, so no critical point is isolated.
    pub fn has_rotation_symmetry(&self) -> bool {
        self.domain.is_rotation_invariant() && self.datum.is_rotation_equivariant()
    }

    /// Magnitude unit of `grad W` and of the defect coefficients.
    pub fn gradient_scale(&self) -> f64 {
        2.0 * TAU * self.degrees.iter().map(|d| d.abs() as f64).sum::<f64>().max(1.0)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest per-vortex displacement: the product-ball distance.
fn ball_distance(a: &[f64], b: &[f64]) -> f64 {
    a.chunks(2).zip(b.chunks(2)).map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1])).fold(0.0, f64::max)
}

fn to_points(x: &[f64]) -> Vec<Point> {
    VortexConfig::points_from_flat(x)
}

/// Minimum-norm solution of `J s = b`, discarding singular values below `rank_tol * max`.
fn pinv_solve(j: &[Vec<f64>], b: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let m = Mat::<f64>::from_fn(n, n, |r, c| j[r][c]);
    let svd = m.svd().map_err(|e| Error::SolveFailure(format!("svd: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = (0..n).map(|k| s[k]).fold(0.0, f64::max);
    let mut out = vec![0.0; n];
    for k in 0..n {
        if s[k] <= rank_tol * smax {
            continue;
        }
        let coef: f64 = (0..n).map(|r| u[(r, k)] * b[r]).sum::<f64>() / s[k];
        for (r, o) in out.iter_mut().enumerate() {
            *o += coef * v[(r, k)];
        }
    }
    Ok(out)
}

/// Ratio of the smallest to the largest singular value.
pub fn conditioning(j: &[Vec<f64>]) -> Result<f64> {
    let n = j.len();
    let m = Mat::<f64>::from_fn(n, n, |r, c| j[r][c]);
    let s = m.singular_values().map_err(|e| Error::SolveFailure(format!("svd: {e:?}")))?;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if max > 0.0 { min / max } else { 0.0 })
}

fn central_jacobian(f: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut j = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let (fp, fm) = (f(&xp)?, f(&xm)?);
        for r in 0..n {
            j[r][k] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalOptions {
    /// Stop when `|grad W| < tol * gradient_scale`.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step relative to the clearance.
    pub fd_rel: f64,
    pub rank_tol: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 40, fd_rel: 1e-4, rank_tol: 1e-4 }
    }
}

#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub points: Vec<Point>,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Central-difference Hessian of `W` at the returned point.
    pub hessian: Vec<Vec<f64>>,
    /// Canonical map on a mesh graded at the returned point.
    pub map: CanonicalMap,
}

fn no_critical(e: Error) -> Error {
    match e {
        Error::NoCriticalPoint(_) => e,
        other => Error::NoCriticalPoint(other.to_string()),
    }
}

/// Newton iteration on `grad W` with central-difference Jacobians; the mesh is
/// regraded at the iterate whenever it drifts from the grading centers.
pub fn find_critical_point_w(problem: &Problem, x_init: &[Point], opts: &CriticalOptions) -> Result<CriticalPoint> {
    let tol = opts.tol * problem.gradient_scale();
    let mut x: Vec<f64> = x_init.iter().flat_map(|p| [p[0], p[1]]).collect();
    let mut iterations = 0;
    for _ in 0..10 {
        let base = problem.map_at(&to_points(&x)).map_err(no_critical)?;
        let x0 = x.clone();
        let clearance = base.config.clearance();
        let trust = 0.25 * clearance;
        let h = opts.fd_rel * clearance;
        let mut grad = |y: &[f64]| -> Result<Vec<f64>> { grad_w_phase(&transport_config(&base, &to_points(y))?) };
        let mut g = grad(&x).map_err(no_critical)?;
        loop {
            if norm(&g) < tol {
                if ball_distance(&x, &x0) <= 0.05 * base.mesh().h_near || iterations == 0 {
                    let hessian = central_jacobian(&mut grad, &x, h).map_err(no_critical)?;
                    return Ok(CriticalPoint {
                        points: to_points(&x),
                        grad_norm: norm(&g),
                        gradient: g,
                        iterations,
                        hessian,
                        map: base,
                    });
                }
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::NoCriticalPoint(format!("no convergence in {iterations} Newton steps, |grad W| = {:.3e}", norm(&g))));
            }
            iterations += 1;
            let j = central_jacobian(&mut grad, &x, h).map_err(no_critical)?;
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut step = pinv_solve(&j, &neg, opts.rank_tol)?;
            let big = step.chunks(2).map(|s| s[0].hypot(s[1])).fold(0.0, f64::max);
            if big > 0.5 * trust {
                for s in &mut step {
                    *s *= 0.5 * trust / big;
                }
            }
            let mut accepted = None;
            let mut s = 1.0;
            for _ in 0..8 {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + s * b).collect();
                if let Ok(gt) = grad(&trial) {
                    if norm(&gt) < norm(&g) {
                        accepted = Some((trial, gt));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((xn, gn)) = accepted else {
                return Err(Error::NoCriticalPoint(format!("line search failed at |grad W| = {:.3e}", norm(&g))));
            };
            x = xn;
            g = gn;
            if ball_distance(&x, &x0) > trust {
                break;
            }
        }
    }
    Err(Error::NoCriticalPoint("iterate keeps drifting away from the mesh grading".into()))
}

impl CriticalPoint {
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Smallest over largest singular value of the Hessian.
    pub fn hessian_conditioning(&self) -> Result<f64> {
        conditioning(&self.hessian)
    }
}

/// Evaluates `c(p, .)` by transport, minimization and stress pairing on a fixed base mesh.
pub struct Stationary<'a> {
    pub problem: &'a Problem,
    pub base: CanonicalMap,
    pub center: Vec<f64>,
    pub delta_trust: f64,
    pub delta_stress: f64,
    pub root_tol: f64,
    warm: RefCell<Option<ScalarField>>,
    evals: RefCell<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryOptions {
    /// Trust radius relative to the clearance of the center.
    pub trust_rel: f64,
    /// Stress cutoff radius relative to the clearance of the center.
    pub stress_rel: f64,
    /// Root tolerance relative to the `grad W` probe on the trust sphere.
    pub root_rel: f64,
    pub max_iter: usize,
    pub rank_tol: f64,
    /// Broyden updates between fresh Jacobians.
    pub refresh: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self { trust_rel: 0.2, stress_rel: 0.2, root_rel: 1e-4, max_iter: 30, rank_tol: 1e-4, refresh: 6 }
    }
}

impl<'a> Stationary<'a> {
    /// Context centered at the configuration of `base`.
    pub fn new(problem: &'a Problem, base: CanonicalMap, opts: &StationaryOptions) -> Result<Self> {
        let center = base.config.flat();
        let clearance = base.config.clearance();
        let delta_trust = opts.trust_rel * clearance;
        let delta_stress = opts.stress_rel * clearance;
        let mut probe: f64 = 0.0;
        for k in 0..center.len() {
            for sign in [-1.0, 1.0] {
                let mut x = center.clone();
                x[k] += sign * delta_trust;
                probe = probe.max(norm(&grad_w_phase(&transport_config(&base, &to_points(&x))?)?));
            }
        }
        Ok(Self {
            problem,
            base,
            center,
            delta_trust,
            delta_stress,
            root_tol: opts.root_rel * probe,
            warm: RefCell::new(None),
            evals: RefCell::new(0),
        })
    }

    pub fn evaluations(&self) -> usize {
        *self.evals.borrow()
    }

    pub fn grad_w(&self, x: &[f64]) -> Result<Vec<f64>> {
        grad_w_phase(&transport_config(&self.base, &to_points(x))?)
    }

    /// `c(p, x)`, flattened.
    pub fn coefficients(&self, p: f64, x: &[f64]) -> Result<Vec<f64>> {
        *self.evals.borrow_mut() += 1;
        let map = transport_config(&self.base, &to_points(x))?;
        let quad = Arc::new(EnergyQuadrature::new(&map, &self.problem.solver.rules));
        let warm = self.warm.borrow().clone();
        let sol = minimize_phase_with(p, &map, quad, &self.problem.solver, warm.as_ref())?;
        let c = coefficients(p, &sol, self.delta_stress)?;
        *self.warm.borrow_mut() = Some(sol.phi);
        Ok(c.flat())
    }

    fn check_trust(&self, x: &[f64]) -> Result<()> {
        let d = ball_distance(x, &self.center);
        if d > self.delta_trust {
            return Err(Error::TrustViolation(format!("distance {d:.3e} exceeds the trust radius {:.3e}", self.delta_trust)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPoint {
    pub p: f64,
    pub points: Vec<Point>,
    pub c: Vec<f64>,
    pub cnorm: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

fn forward_jacobian(ctx: &Stationary, p: f64, x: &[f64], c: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let h = 1e-3 * ctx.delta_trust;
    let mut j = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut xp = x.to_vec();
        xp[k] += h;
        let cp = ctx.coefficients(p, &xp)?;
        for r in 0..n {
            j[r][k] = (cp[r] - c[r]) / h;
        }
    }
    Ok(j)
}

/// Root of `c(p, .)` in the trust ball by Newton steps with Broyden updates.
pub fn find_stationary(ctx: &Stationary, p: f64, x_init: &[Point], opts: &StationaryOptions) -> Result<StationaryPoint> {
    let start = ctx.evaluations();
    let mut x: Vec<f64> = x_init.iter().flat_map(|q| [q[0], q[1]]).collect();
    ctx.check_trust(&x)?;
    let mut c = ctx.coefficients(p, &x)?;
    let done = |x: &[f64], c: Vec<f64>, iterations: usize| StationaryPoint {
        p,
        points: to_points(x),
        cnorm: norm(&c),
        c,
        evaluations: ctx.evaluations() - start,
        iterations,
    };
    if norm(&c) < ctx.root_tol {
        return Ok(done(&x, c, 0));
    }
    let mut j = forward_jacobian(ctx, p, &x, &c)?;
    let mut since_fresh = 0;
    for iter in 1..=opts.max_iter {
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let step = pinv_solve(&j, &neg, opts.rank_tol)?;
        let mut accepted = None;
        let mut s = 1.0;
        let mut outside = true;
        for _ in 0..6 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + s * b).collect();
            if ctx.check_trust(&trial).is_ok() {
                outside = false;
                let ct = ctx.coefficients(p, &trial)?;
                if norm(&ct) < norm(&c) {
                    accepted = Some((trial, ct));
                    break;
                }
            }
            s *= 0.5;
        }
        match accepted {
            Some((xn, cn)) => {
                let dx: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let dd: f64 = dx.iter().map(|v| v * v).sum();
                let n = dx.len();
                let jdx: Vec<f64> = (0..n).map(|r| (0..n).map(|k| j[r][k] * dx[k]).sum()).collect();
                for r in 0..n {
                    let y = cn[r] - c[r] - jdx[r];
                    for k in 0..n {
                        j[r][k] += y * dx[k] / dd;
                    }
                }
                x = xn;
                c = cn;
                since_fresh += 1;
                if norm(&c) < ctx.root_tol {
                    return Ok(done(&x, c, iter));
                }
                if since_fresh >= opts.refresh {
                    j = forward_jacobian(ctx, p, &x, &c)?;
                    since_fresh = 0;
                }
            }
            None if outside => {
                return Err(Error::TrustViolation(format!("Newton steps leave the trust ball at |c| = {:.3e}", norm(&c))));
            }
            None if since_fresh > 0 => {
                j = forward_jacobian(ctx, p, &x, &c)?;
                since_fresh = 0;
            }
            None => {
                return Err(Error::SolverStalled { iterations: iter, eps: 0.0, residual: norm(&c) });
            }
        }
    }
    Err(Error::SolverStalled { iterations: opts.max_iter, eps: 0.0, residual: norm(&c) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationStep {
    pub p: f64,
    pub points: Vec<Point>,
    pub cnorm: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// Product-ball distance to the critical point of `W`.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationResult {
    pub p_schedule: Vec<f64>,
    pub x_star: Option<Vec<Point>>,
    pub steps: Vec<ContinuationStep>,
    pub w_certificate: Option<DegreeCertificate>,
    pub c_certificate: Option<DegreeCertificate>,
    /// Smallest over largest singular value of the Hessian of `W` at `x_star`.
    pub hessian_conditioning: Option<f64>,
    pub root_tol: f64,
    pub delta_trust: f64,
    pub failures: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationOptions {
    pub critical: CriticalOptions,
    pub stationary: StationaryOptions,
    pub certify: bool,
    pub degree_samples: usize,
    /// Hessians with conditioning below this are treated as degenerate.
    pub min_conditioning: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            critical: CriticalOptions::default(),
            stationary: StationaryOptions::default(),
            certify: true,
            degree_samples: 8,
            min_conditioning: 1e-3,
        }
    }
}

impl ContinuationResult {
    /// Nonzero degree of `grad W`, matched by `c` at the coarsest exponent, on a nondegenerate critical point.
    pub fn certified(&self) -> bool {
        match (&self.w_certificate, &self.c_certificate) {
            (Some(w), Some(c)) => w.degree != 0 && w.degree == c.degree,
            _ => false,
        }
    }

    pub fn converged(&self) -> bool {
        !self.steps.is_empty()
            && self.steps.len() == self.p_schedule.len()
            && self.steps.iter().all(|s| s.cnorm < self.root_tol)
    }

    pub fn distances_decreasing(&self) -> bool {
        self.steps.len() >= 2 && self.steps.windows(2).all(|w| w[1].distance < w[0].distance)
    }

    pub fn to_csv(&self) -> String {
        let n = self.steps.first().map_or(0, |s| s.points.len());
        let mut s = String::from("p");
        for j in 0..n {
            let _ = write!(s, ",x{j}_1,x{j}_2");
        }
        s.push_str(",cnorm,evals\n");
        for st in &self.steps {
            let _ = write!(s, "{:.16e}", st.p);
            for q in &st.points {
                let _ = write!(s, ",{:.16e},{:.16e}", q[0], q[1]);
            }
            let _ = writeln!(s, ",{:.16e},{}", st.cnorm, st.evaluations);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        match &self.x_star {
            Some(x) => {
                for (j, q) in x.iter().enumerate() {
                    let _ = writeln!(s, "x_star[{j}] = {:.16e} {:.16e}", q[0], q[1]);
                }
            }
            None => s.push_str("x_star = none\n"),
        }
        if let Some(c) = self.hessian_conditioning {
            let _ = writeln!(s, "hessian_conditioning = {c:.16e}");
        }
        let _ = writeln!(s, "root_tol = {:.16e}", self.root_tol);
        let _ = writeln!(s, "delta_trust = {:.16e}", self.delta_trust);
        for st in &self.steps {
            let _ = writeln!(s, "distance[{:.16e}] = {:.16e}", st.p, st.distance);
        }
        for (name, cert) in [("w_degree", &self.w_certificate), ("c_degree", &self.c_certificate)] {
            match cert {
                Some(c) => {
                    let _ = writeln!(s, "{name} = {}", c.degree);
                    let _ = writeln!(s, "{name}_min_norm = {:.16e}", c.min_norm);
                }
                None => {
                    let _ = writeln!(s, "{name} = none");
                }
            }
        }
        let _ = writeln!(s, "converged = {}", self.converged());
        let _ = writeln!(s, "certified = {}", self.certified());
        for f in &self.failures {
            let _ = writeln!(s, "failure = {f}");
        }
        s
    }
}

/// Warm-started stationary solves along an increasing exponent schedule,
/// with degree certificates of `grad W` and `c(p_0, .)` around the critical point.
pub fn continuation(problem: &Problem, p_schedule: &[f64], x_init: &[Point], opts: &ContinuationOptions) -> Result<ContinuationResult> {
    if p_schedule.is_empty() || p_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadSchedule("exponent schedule must be nonempty and increasing".into()));
    }
    if let Some(p) = p_schedule.iter().find(|p| !(**p >= 1.5 && **p < 2.0)) {
        return Err(Error::BadExponent(*p));
    }
    let mut result = ContinuationResult {
        p_schedule: p_schedule.to_vec(),
        x_star: None,
        steps: Vec::new(),
        w_certificate: None,
        c_certificate: None,
        hessian_conditioning: None,
        root_tol: 0.0,
        delta_trust: 0.0,
        failures: Vec::new(),
    };
    let critical = match find_critical_point_w(problem, x_init, &opts.critical) {
        Ok(c) => c,
        Err(e) => {
            result.failures.push(format!("critical point of W: {e}"));
            return Ok(result);
        }
    };
    result.x_star = Some(critical.points.clone());
    let cond = critical.hessian_conditioning()?;
    result.hessian_conditioning = Some(cond);
    let ctx = Stationary::new(problem, critical.map.clone(), &opts.stationary)?;
    result.root_tol = ctx.root_tol;
    result.delta_trust = ctx.delta_trust;
    if opts.certify {
        let symmetric = problem.has_rotation_symmetry() && critical.points.iter().any(|q| q[0].hypot(q[1]) > 1e-6);
        if symmetric {
            result.failures.push(
                "W is invariant under rotations about the origin and the critical point lies on a circle of critical points, so the degree on a ball boundary is undefined"
                    .into(),
            );
        }
        if cond < opts.min_conditioning {
            result.failures.push(format!("degenerate Hessian of W at the critical point (conditioning {cond:.3e})"));
        }
        let trusted = !symmetric && cond >= opts.min_conditioning;
        let floor = 1e-8 * problem.gradient_scale();
        match brouwer_degree("grad W", |x| ctx.grad_w(x), &ctx.center, ctx.delta_trust, opts.degree_samples, floor) {
            Ok(c) if trusted => result.w_certificate = Some(c),
            Ok(c) => result.failures.push(format!("discrete grad W degree {} (min norm {:.3e}) not certified", c.degree, c.min_norm)),
            Err(e) => result.failures.push(format!("grad W degree: {e}")),
        }
        if result.w_certificate.is_some() {
            let p0 = p_schedule[0];
            match brouwer_degree("c", |x| ctx.coefficients(p0, x), &ctx.center, ctx.delta_trust, opts.degree_samples, 0.1 * ctx.root_tol) {
                Ok(c) => result.c_certificate = Some(c),
                Err(e) => result.failures.push(format!("c degree at p = {p0}: {e}")),
            }
        }
        if let (Some(w), Some(c)) = (&result.w_certificate, &result.c_certificate) {
            if w.degree == 0 {
                result.failures.push("grad W has degree 0".into());
            } else if w.degree != c.degree {
                result.failures.push(format!("degree of c ({}) differs from degree of grad W ({})", c.degree, w.degree));
            }
        }
    }
    let mut x = critical.points.clone();
    for &p in p_schedule {
        match find_stationary(&ctx, p, &x, &opts.stationary) {
            Ok(s) => {
                x = s.points.clone();
                result.steps.push(ContinuationStep {
                    p,
                    distance: ball_distance(&critical.flat(), &s.points.iter().flat_map(|q| [q[0], q[1]]).collect::<Vec<_>>()),
                    points: s.points,
                    cnorm: s.cnorm,
                    evaluations: s.evaluations,
                    iterations: s.iterations,
                });
            }
            Err(e) => {
                result.failures.push(format!("stationary solve at p = {p}: {e}"));
                break;
            }
        }
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub point: Vec<Point>,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Largest `|c(p, x) - grad W(x)|` over the grid at exponent `p`.
    pub fn max_error(&self, p: f64) -> f64 {
        self.rows.iter().filter(|r| r.p == p).map(|r| r.error).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,point,error\n");
        for r in &self.rows {
            let coords: Vec<String> = r.point.iter().map(|q| format!("{:.16e} {:.16e}", q[0], q[1])).collect();
            let _ = writeln!(s, "{:.16e},{},{:.16e}", r.p, coords.join(" "), r.error);
        }
        s
    }
}

/// `|c(p, x) - grad W(x)|` on a `k x k` grid of single-vortex displacements of
/// half-width `radius` around `center`, each on a mesh graded at the grid point.
pub fn uniform_convergence_sweep(
    problem: &Problem,
    center: &[Point],
    radius: f64,
    k: usize,
    p_list: &[f64],
    delta: f64,
) -> Result<SweepReport> {
    let mut rows = Vec::new();
    let offsets: Vec<f64> = if k <= 1 {
        vec![0.0]
    } else {
        (0..k).map(|i| radius * (2.0 * i as f64 / (k - 1) as f64 - 1.0)).collect()
    };
    for &oy in &offsets {
        for &ox in &offsets {
            let points: Vec<Point> = center.iter().map(|q| [q[0] + ox, q[1] + oy]).collect();
            let map = problem.map_at(&points)?;
            let g = grad_w_phase(&map)?;
            let quad = Arc::new(EnergyQuadrature::new(&map, &problem.solver.rules));
            let mut warm: Option<ScalarField> = None;
            for &p in p_list {
                let sol = minimize_phase_with(p, &map, quad.clone(), &problem.solver, warm.as_ref())?;
                let c = coefficients(p, &sol, delta)?.flat();
                let error = c.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                rows.push(SweepRow { p, point: points.clone(), error });
                warm = Some(sol.phi);
            }
        }
    }
    Ok(SweepReport { rows })
}
