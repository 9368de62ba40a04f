use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use super::config::{check_compatibility, point_sources, VortexConfig};
use crate::geometry::{principal_angle, winding_of_loop, BoundaryDatum, Domain, Mesh};
use crate::laplace::{mean_value_gradient, recovered_gradient_at, stiffness_apply, DirichletSolver, ScalarField};
use crate::{cross, dist, dot, sub, Error, Point, Result};

/// Point inside an inner boundary loop carrying that loop's degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub component: usize,
    pub point: Point,
    pub degree: i64,
}

/// Singular harmonic map `u_x = e^{i phi} w_*`, with `w_*` the product of the
/// vortex and anchor factors and `phi` the discrete harmonic phase correction.
#[derive(Clone, Debug)]
pub struct CanonicalMap {
    pub config: VortexConfig,
    pub anchors: Vec<Anchor>,
    pub phi: ScalarField,
    /// Multiple of `2 pi` added to the lift on each inner loop.
    pub gauge: Vec<i64>,
    /// `int dphi/dnu` over each inner loop.
    pub flux: Vec<f64>,
    mesh: Arc<Mesh>,
    domain: Domain,
    datum: BoundaryDatum,
    solver: Arc<DirichletSolver>,
    grads: Vec<Point>,
    nodal: Vec<Point>,
}

/// Angle from `a - s` to `b - s`, in `(-pi, pi]`.
pub(crate) fn subtended(a: Point, b: Point, s: Point) -> f64 {
    let (u, v) = (sub(a, s), sub(b, s));
    cross(u, v).atan2(dot(u, v))
}

/// Discrete flux `sum_{v in loop l} (K u)_v`, which approximates the integral of `du/dnu` over loop `l`.
pub fn loop_flux(mesh: &Mesh, u: &[f64], l: usize) -> f64 {
    let ku = stiffness_apply(mesh, u);
    mesh.boundary_loop(l).iter().map(|v| ku[*v]).sum()
}

impl CanonicalMap {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn datum(&self) -> &BoundaryDatum {
        &self.datum
    }

    pub fn solver(&self) -> &Arc<DirichletSolver> {
        &self.solver
    }

    pub(crate) fn sources(&self) -> impl Iterator<Item = (Point, i64)> + '_ {
        self.config
            .points()
            .iter()
            .copied()
            .zip(self.config.degrees().iter().copied())
            .chain(self.anchors.iter().map(|a| (a.point, a.degree)))
    }

    /// Current of the anchor factors (smooth in the domain).
    pub fn anchor_current(&self, p: Point) -> Point {
        point_sources(self.anchors.iter().map(|a| (a.point, a.degree)), p)
    }

    /// Current of the vortex factors.
    pub fn vortex_current(&self, p: Point) -> Point {
        point_sources(self.config.points().iter().copied().zip(self.config.degrees().iter().copied()), p)
    }

    /// Gradient of `phi` on triangle `t`.
    pub fn phi_gradient(&self, t: usize) -> Point {
        self.grads[t]
    }

    /// Vertex-averaged gradient of `phi` interpolated at `p`.
    pub fn phi_gradient_recovered(&self, p: Point) -> Result<Point> {
        recovered_gradient_at(&self.nodal, &self.mesh, p)
    }

    /// Mean-value gradient of `phi` over the disk of half the boundary distance around `p`.
    pub fn phi_gradient_smoothed(&self, p: Point) -> Result<Point> {
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain(p[0], p[1]));
        }
        let rho = 0.5 * self.domain.distance_to_boundary(p);
        Ok(mean_value_gradient(&self.mesh, |t| self.grads[t], p, rho))
    }

    /// Smooth part of the current on triangle `t`: `grad phi` plus the anchor terms.
    pub fn regular_in(&self, t: usize, p: Point) -> Point {
        let g = self.grads[t];
        let a = self.anchor_current(p);
        [g[0] + a[0], g[1] + a[1]]
    }

    /// Full current `j u_x` at `p`, assuming `p` lies in triangle `t`.
    pub fn current_in(&self, t: usize, p: Point) -> Point {
        let r = self.regular_in(t, p);
        let s = self.vortex_current(p);
        [r[0] + s[0], r[1] + s[1]]
    }

    pub fn current_at(&self, p: Point) -> Result<Point> {
        if self.config.points().iter().any(|x| dist(*x, p) < 1e-12) {
            return Err(Error::SingularPoint(p[0], p[1]));
        }
        let (t, _) = self.mesh.locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
        Ok(self.current_in(t, p))
    }

    /// `j u_j(x_j)`: the current with the own singular term of vortex `j` removed, at `x_j`.
    pub fn regular_current_at_vortex(&self, j: usize) -> Result<Point> {
        let x = self.config.points()[j];
        let g = self.phi_gradient_smoothed(x)?;
        let others = point_sources(
            self.config
                .points()
                .iter()
                .copied()
                .zip(self.config.degrees().iter().copied())
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, s)| s),
            x,
        );
        let a = self.anchor_current(x);
        Ok([g[0] + others[0] + a[0], g[1] + others[1] + a[1]])
    }

    /// Phase of `w_*` at `p`, as a sum of principal arguments.
    pub fn base_phase(&self, p: Point) -> f64 {
        self.sources().map(|(x, d)| d as f64 * (p[1] - x[1]).atan2(p[0] - x[0])).sum()
    }

    /// `u_x(p)`.
    pub fn value_at(&self, p: Point) -> Result<Complex64> {
        if self.config.points().iter().any(|x| dist(*x, p) < 1e-12) {
            return Err(Error::SingularPoint(p[0], p[1]));
        }
        let phi = self.phi.value_at(&self.mesh, p)?;
        Ok(Complex64::from_polar(1.0, phi + self.base_phase(p)))
    }
}

fn check_points_in_mesh(mesh: &Mesh, config: &VortexConfig) -> Result<()> {
    for x in config.points() {
        if mesh.locate(*x).is_none() {
            return Err(Error::OutOfDomain(x[0], x[1]));
        }
    }
    Ok(())
}

/// Lift of `g conj(w_*)` along loop `l`, accumulated edge by edge.
fn lift_loop(mesh: &Mesh, datum: &BoundaryDatum, sources: &[(Point, i64)], l: usize, out: &mut [f64]) -> Result<()> {
    let verts = mesh.boundary_loop(l);
    let phase = &datum.loops[l];
    let param = |v: usize| mesh.boundary_param[v].map(|(_, t)| t).unwrap_or(0.0);
    let star = |p: Point| -> f64 { sources.iter().map(|(x, d)| *d as f64 * (p[1] - x[1]).atan2(p[0] - x[0])).sum() };
    let v0 = verts[0];
    let mut t = param(v0);
    let mut h = principal_angle(phase.phase(t) - star(mesh.vertices[v0]));
    out[v0] = h;
    let n = verts.len();
    for k in 0..n {
        let (a, b) = (verts[k], verts[(k + 1) % n]);
        let tb = t + principal_angle(param(b) - param(a));
        let dg = phase.phase(tb) - phase.phase(t);
        if dg.abs() >= PI {
            return Err(Error::AmbiguousLift { index: b, gap: dg.abs() });
        }
        let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
        let dpsi: f64 = sources.iter().map(|(x, d)| *d as f64 * subtended(xa, xb, *x)).sum();
        h += dg - dpsi;
        t = tb;
        if k + 1 < n {
            out[b] = h;
        } else {
            let gap = h - out[v0];
            if gap.abs() > 1e-8 {
                return Err(Error::AmbiguousLift { index: v0, gap: gap.abs() });
            }
        }
    }
    Ok(())
}

pub fn build_canonical_map(
    domain: &Domain,
    g: &BoundaryDatum,
    config: &VortexConfig,
    mesh: Arc<Mesh>,
) -> Result<CanonicalMap> {
    check_compatibility(domain, g, config).into_result()?;
    if mesh.n_boundary_loops() != domain.n_components() {
        return Err(Error::InvalidDomain(format!(
            "mesh has {} boundary loops but the domain has {}",
            mesh.n_boundary_loops(),
            domain.n_components()
        )));
    }
    check_points_in_mesh(&mesh, config)?;
    let solver = Arc::new(DirichletSolver::new(&mesh)?);
    build_with_solver(domain, g, config, mesh, solver)
}

/// Canonical map on a mesh whose Dirichlet solver is already factored.
pub fn build_with_solver(
    domain: &Domain,
    g: &BoundaryDatum,
    config: &VortexConfig,
    mesh: Arc<Mesh>,
    solver: Arc<DirichletSolver>,
) -> Result<CanonicalMap> {
    check_compatibility(domain, g, config).into_result()?;
    check_points_in_mesh(&mesh, config)?;
    let anchors: Vec<Anchor> = (1..domain.n_components())
        .map(|l| {
            let point = domain.hole_anchor(l).ok_or_else(|| Error::InvalidDomain(format!("loop {l} has no anchor")))?;
            Ok(Anchor { component: l, point, degree: g.winding(l) })
        })
        .collect::<Result<_>>()?;
    let sources: Vec<(Point, i64)> = config
        .points()
        .iter()
        .copied()
        .zip(config.degrees().iter().copied())
        .chain(anchors.iter().map(|a| (a.point, a.degree)))
        .collect();
    let mut lift = vec![0.0; mesh.n_vertices()];
    for l in 0..domain.n_components() {
        lift_loop(&mesh, g, &sources, l, &mut lift)?;
    }
    let mut phi = solver.solve(&mesh, |v| lift[v])?;
    let mut gauge = Vec::new();
    let mut flux = Vec::new();
    for l in 1..domain.n_components() {
        let loop_l: std::collections::HashSet<usize> = mesh.boundary_loop(l).iter().copied().collect();
        let omega = solver.solve(&mesh, |v| if loop_l.contains(&v) { 1.0 } else { 0.0 })?;
        let capacity = loop_flux(&mesh, &omega.values, l);
        let f0 = loop_flux(&mesh, &phi.values, l);
        let k = (-f0 / (TAU * capacity)).round();
        for (p, w) in phi.values.iter_mut().zip(&omega.values) {
            *p += TAU * k * w;
        }
        gauge.push(k as i64);
        flux.push(loop_flux(&mesh, &phi.values, l));
    }
    Ok(assemble(config.clone(), anchors, phi, gauge, flux, mesh, domain.clone(), g.clone(), solver))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    config: VortexConfig,
    anchors: Vec<Anchor>,
    phi: ScalarField,
    gauge: Vec<i64>,
    flux: Vec<f64>,
    mesh: Arc<Mesh>,
    domain: Domain,
    datum: BoundaryDatum,
    solver: Arc<DirichletSolver>,
) -> CanonicalMap {
    let grads = (0..mesh.n_triangles()).map(|t| phi.gradient(&mesh, t)).collect();
    let nodal = phi.nodal_gradients(&mesh);
    CanonicalMap { config, anchors, phi, gauge, flux, mesh, domain, datum, solver, grads, nodal }
}

/// Canonical map for moved vortices on the same mesh, continuing the boundary lift
/// of `base` vertex by vertex so that the gauge is preserved.
pub fn transport_config(base: &CanonicalMap, new_points: &[Point]) -> Result<CanonicalMap> {
    if new_points == base.config.points() {
        return Ok(base.clone());
    }
    if new_points.len() != base.config.n() {
        return Err(Error::InvalidConfig("transport changes the number of vortices".into()));
    }
    let limit = 0.5 * base.config.clearance();
    let shift = base.config.points().iter().zip(new_points).map(|(a, b)| dist(*a, *b)).fold(0.0, f64::max);
    if shift > limit {
        return Err(Error::TransportTooFar(format!("displacement {shift:.3e} exceeds {limit:.3e}")));
    }
    let config = base.config.moved(&base.domain, new_points.to_vec())?;
    check_points_in_mesh(&base.mesh, &config)?;
    let mesh = &base.mesh;
    let mut lift = base.phi.values.clone();
    for l in 0..mesh.n_boundary_loops() {
        let verts = mesh.boundary_loop(l);
        let mut samples = Vec::with_capacity(verts.len());
        for &v in verts {
            let x = mesh.vertices[v];
            let c: f64 = base
                .config
                .points()
                .iter()
                .zip(new_points)
                .zip(base.config.degrees())
                .map(|((old, new), d)| -(*d as f64) * subtended(sub(x, *old), sub(x, *new), [0.0, 0.0]))
                .sum();
            lift[v] += c;
            samples.push(Complex64::from_polar(1.0, c));
        }
        let w = winding_of_loop(&samples).map_err(|e| Error::TransportTooFar(e.to_string()))?;
        if w.value != 0 {
            return Err(Error::TransportTooFar(format!("boundary correction on loop {l} winds {} times", w.value)));
        }
    }
    let phi = base.solver.solve(mesh, |v| lift[v])?;
    let flux = (1..mesh.n_boundary_loops()).map(|l| loop_flux(mesh, &phi.values, l)).collect();
    Ok(assemble(
        config,
        base.anchors.clone(),
        phi,
        base.gauge.clone(),
        flux,
        base.mesh.clone(),
        base.domain.clone(),
        base.datum.clone(),
        base.solver.clone(),
    ))
}
