use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use super::boundary::{boundary_nodes, BoundaryNode};
use super::{EnergyMethod, EnergyReport, GreenBreakdown};
use crate::geometry::{BoundaryDatum, Domain, Mesh};
use crate::laplace::{mean_value_gradient, NeumannSolver, ScalarField};
use crate::vortex::{Anchor, CanonicalMap, VortexConfig};
use crate::{dist, perp, sub, Error, Point, Result};

/// Solution of the singular linear problem: `Phi = H_hat + sum d ln|x - x_j| + sum e ln|x - a|`
/// and, on the annulus, `Theta = c ln|x|`.
#[derive(Clone, Debug)]
pub struct GreenData {
    pub config: VortexConfig,
    pub anchors: Vec<Anchor>,
    /// `Phi` minus all logarithmic terms, with zero boundary mean.
    pub h_hat: ScalarField,
    /// Coefficient `c` of `Theta = c ln|x|` (annulus only).
    pub theta: Option<f64>,
    /// Net Neumann load before projection; zero up to boundary quadrature error.
    pub load_defect: f64,
    mesh: Arc<Mesh>,
    domain: Domain,
    datum: BoundaryDatum,
}

fn sources<'a>(config: &'a VortexConfig, anchors: &'a [Anchor]) -> impl Iterator<Item = (Point, i64)> + 'a {
    config
        .points()
        .iter()
        .copied()
        .zip(config.degrees().iter().copied())
        .chain(anchors.iter().map(|a| (a.point, a.degree)))
}

fn log_gradient(p: Point, x: Point) -> Point {
    let h = sub(p, x);
    let r2 = h[0] * h[0] + h[1] * h[1];
    [h[0] / r2, h[1] / r2]
}

impl GreenData {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `sum d ln|p - x_j| + sum e ln|p - a|`.
    pub fn log_part(&self, p: Point) -> f64 {
        sources(&self.config, &self.anchors).map(|(x, d)| d as f64 * dist(p, x).ln()).sum()
    }

    pub fn phi_at(&self, p: Point) -> Result<f64> {
        Ok(self.h_hat.value_at(&self.mesh, p)? + self.log_part(p))
    }

    /// `H_* = Phi - sum d_j ln|x - x_j|`.
    pub fn h_star_at(&self, p: Point) -> Result<f64> {
        let anchors: f64 = self.anchors.iter().map(|a| a.degree as f64 * dist(p, a.point).ln()).sum();
        Ok(self.h_hat.value_at(&self.mesh, p)? + anchors)
    }

    /// `grad H_j(x_j)` with `H_j = Phi - d_j ln|x - x_j|`.
    pub fn grad_h_j(&self, j: usize) -> Result<Point> {
        let x = self.config.points()[j];
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain(x[0], x[1]));
        }
        let rho = 0.5 * self.domain.distance_to_boundary(x);
        let mut g = mean_value_gradient(&self.mesh, |t| self.h_hat.gradient(&self.mesh, t), x, rho);
        for (k, (y, d)) in sources(&self.config, &self.anchors).enumerate() {
            if k != j {
                let lg = log_gradient(x, y);
                g[0] += d as f64 * lg[0];
                g[1] += d as f64 * lg[1];
            }
        }
        Ok(g)
    }

    pub fn theta_gradient(&self, p: Point) -> Point {
        match self.theta {
            Some(c) => {
                let lg = log_gradient(p, [0.0, 0.0]);
                [c * lg[0], c * lg[1]]
            }
            None => [0.0, 0.0],
        }
    }

    /// `int dTheta/dnu` over the inner loop.
    pub fn theta_flux(&self) -> f64 {
        self.theta.map_or(0.0, |c| -TAU * c)
    }

    /// `grad^perp Phi + grad Theta`, which reproduces `j u_x` of the canonical map.
    pub fn current_at(&self, p: Point) -> Result<Point> {
        let (t, _) = self.mesh.locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
        let mut g = self.h_hat.gradient(&self.mesh, t);
        for (x, d) in sources(&self.config, &self.anchors) {
            let lg = log_gradient(p, x);
            g[0] += d as f64 * lg[0];
            g[1] += d as f64 * lg[1];
        }
        let q = perp(g);
        let th = self.theta_gradient(p);
        Ok([q[0] + th[0], q[1] + th[1]])
    }
}

fn load_vector(nodes: &[BoundaryNode], datum: &BoundaryDatum, srcs: &[(Point, i64)], nv: usize) -> Vec<f64> {
    let mut load = vec![0.0; nv];
    for n in nodes {
        let normal = [n.tangent[1], -n.tangent[0]];
        let mut dl = 0.0;
        for (x, d) in srcs {
            let lg = log_gradient(n.x, *x);
            dl += *d as f64 * (lg[0] * normal[0] + lg[1] * normal[1]);
        }
        let f = datum.loops[n.loop_index].phase_derivative(n.t) - dl;
        load[n.a] += n.weight * n.lam[0] * f;
        load[n.b] += n.weight * n.lam[1] * f;
    }
    load
}

pub fn solve_linear_singular_problem(map: &CanonicalMap) -> Result<GreenData> {
    let solver = NeumannSolver::new(map.mesh())?;
    solve_linear_singular_problem_with(map, &solver)
}

pub fn solve_linear_singular_problem_with(map: &CanonicalMap, solver: &NeumannSolver) -> Result<GreenData> {
    let domain = map.domain();
    let mesh = map.mesh();
    let theta = match (domain.n_components(), domain.inner_radius()) {
        (1, _) => None,
        (2, Some(_)) => Some(-map.flux[0] / TAU),
        _ => return Err(Error::InvalidDomain("only the annulus is supported among multiply connected domains".into())),
    };
    let srcs: Vec<(Point, i64)> = sources(&map.config, &map.anchors).collect();
    let nodes = boundary_nodes(mesh, domain, 6);
    let load = load_vector(&nodes, map.datum(), &srcs, mesh.n_vertices());
    let load_defect = load.iter().sum::<f64>();
    let h_hat = solver.solve(mesh, &load)?;
    Ok(GreenData {
        config: map.config.clone(),
        anchors: map.anchors.clone(),
        h_hat,
        theta,
        load_defect,
        mesh: mesh.clone(),
        domain: domain.clone(),
        datum: map.datum().clone(),
    })
}

/// `W` from the Green representation, with its four-term breakdown.
pub fn renorm_energy_green(green: &GreenData) -> Result<EnergyReport> {
    let pts = green.config.points();
    let deg = green.config.degrees();
    let mut pairwise = 0.0;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j {
                pairwise += TAU * (deg[i] * deg[j]) as f64 * (1.0 / dist(pts[i], pts[j])).ln();
            }
        }
    }
    let nodes = boundary_nodes(&green.mesh, &green.domain, 6);
    let mut boundary = 0.0;
    for n in &nodes {
        let h = n.lam[0] * green.h_hat.values[n.a] + n.lam[1] * green.h_hat.values[n.b];
        let phi = h + green.log_part(n.x);
        boundary += n.weight * phi * green.datum.loops[n.loop_index].phase_derivative(n.t);
    }
    let mut self_term = 0.0;
    for (x, d) in pts.iter().zip(deg) {
        self_term -= TAU * *d as f64 * green.h_star_at(*x)?;
    }
    let theta = match (green.theta, green.domain.inner_radius()) {
        (Some(c), Some(r)) => -2.0 * PI * c * c * r.ln(),
        _ => 0.0,
    };
    let value = pairwise + boundary + self_term + theta;
    Ok(EnergyReport {
        value,
        method: EnergyMethod::Green,
        breakdown: Some(GreenBreakdown { pairwise, boundary, self_term, theta }),
        error_estimate: green.load_defect.abs(),
        samples: Vec::new(),
    })
}

/// `-4 pi d_j (grad H_j(x_j) - grad^perp Theta(x_j))` for each vortex, flattened.
pub fn grad_w_green(green: &GreenData) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * green.config.n());
    for (j, (x, d)) in green.config.points().iter().zip(green.config.degrees()).enumerate() {
        let gh = green.grad_h_j(j)?;
        let gt = perp(green.theta_gradient(*x));
        let s = -2.0 * TAU * *d as f64;
        out.push(s * (gh[0] - gt[0]));
        out.push(s * (gh[1] - gt[1]));
    }
    Ok(out)
}
