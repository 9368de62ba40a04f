use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use rayon::prelude::*;

use super::{EnergyMethod, EnergyReport};
use crate::quadrature::{circle_nodes, gauss_interval, polar_rule, triangle_perp_log_gradient};
use crate::vortex::CanonicalMap;
use crate::{dist, dot, norm, perp, sub, Error, Point, Result};

const CIRCLE_NODES: usize = 512;

fn psi(srcs: &[(Point, i64)], p: Point) -> f64 {
    srcs.iter().map(|(x, d)| *d as f64 * dist(p, *x).ln()).sum()
}

fn grad_psi(srcs: &[(Point, i64)], p: Point) -> Point {
    let mut g = [0.0, 0.0];
    for (x, d) in srcs {
        let h = sub(p, *x);
        let r2 = dot(h, h);
        g[0] += *d as f64 * h[0] / r2;
        g[1] += *d as f64 * h[1] / r2;
    }
    g
}

/// `W_rho` for one excision radius.
fn w_rho(map: &CanonicalMap, srcs: &[(Point, i64)], outer: f64, cross_full: f64, dirichlet: f64, rho: f64) -> Result<f64> {
    let mesh = map.mesh();
    let mut total = outer + 2.0 * cross_full + dirichlet;
    for (&x, &d) in map.config.points().iter().zip(map.config.degrees()) {
        let mut circle = 0.0;
        let mut cross_ball = 0.0;
        for (p, _, w) in circle_nodes(x, rho, CIRCLE_NODES) {
            let n = [(p[0] - x[0]) / rho, (p[1] - x[1]) / rho];
            let g = grad_psi(srcs, p);
            // normal of the excised region points into the ball
            circle -= w * psi(srcs, p) * dot(g, n);
            cross_ball += w * map.phi.value_at(mesh, p)? * dot(perp(g), n);
        }
        let mut ball_dirichlet = 0.0;
        for t in mesh.triangles_near(x, rho) {
            let tri = mesh.corners(t);
            let outside: f64 = polar_rule(&tri, x, rho, 8, 8).iter().map(|n| n.weight).sum();
            let inside = (mesh.area(t) - outside).max(0.0);
            let g = map.phi_gradient(t);
            ball_dirichlet += inside * dot(g, g);
        }
        total += circle - 2.0 * cross_ball - ball_dirichlet - std::f64::consts::TAU * (d * d) as f64 * (1.0 / rho).ln();
    }
    Ok(total)
}

/// `W` as the limit of `W_rho`, fitted by `W + c1 rho + c2 rho^2` over the schedule.
pub fn renorm_energy_rho_limit(map: &CanonicalMap, rho_schedule: &[f64]) -> Result<EnergyReport> {
    let mesh = map.mesh();
    if rho_schedule.len() < 4 {
        return Err(Error::BadSchedule("at least four radii are needed for the fit".into()));
    }
    if rho_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadSchedule("radii must be strictly decreasing".into()));
    }
    let (max, min) = (rho_schedule[0], rho_schedule[rho_schedule.len() - 1]);
    if min <= 2.0 * mesh.h_near {
        return Err(Error::BadSchedule(format!("smallest radius {min} is not above twice h_near = {}", 2.0 * mesh.h_near)));
    }
    let limit = 0.5 * map.config.clearance();
    if max >= limit {
        return Err(Error::BadSchedule(format!("largest radius {max} is not below half the vortex clearance {limit}")));
    }
    let srcs: Vec<(Point, i64)> = map.sources().collect();
    let mut outer = 0.0;
    for e in &mesh.boundary_edges {
        let (a, b) = (mesh.vertices[e.a], mesh.vertices[e.b]);
        let chord = sub(b, a);
        let len = norm(chord);
        let nu = [chord[1] / len, -chord[0] / len];
        for (s, w) in gauss_interval(8, 0.0, 1.0) {
            let p = [a[0] + s * chord[0], a[1] + s * chord[1]];
            outer += w * len * psi(&srcs, p) * dot(grad_psi(&srcs, p), nu);
        }
    }
    let per_triangle: Vec<(f64, f64)> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.corners(t);
            let mut iperp = [0.0, 0.0];
            for (x, d) in &srcs {
                let q = triangle_perp_log_gradient(&tri, *x);
                iperp[0] += *d as f64 * q[0];
                iperp[1] += *d as f64 * q[1];
            }
            let g = map.phi_gradient(t);
            (dot(g, iperp), mesh.area(t) * dot(g, g))
        })
        .collect();
    let cross_full: f64 = per_triangle.iter().map(|c| c.0).sum();
    let dirichlet: f64 = per_triangle.iter().map(|c| c.1).sum();
    let samples = rho_schedule
        .iter()
        .map(|&rho| Ok((rho, w_rho(map, &srcs, outer, cross_full, dirichlet, rho)?)))
        .collect::<Result<Vec<_>>>()?;
    let a = Mat::<f64>::from_fn(samples.len(), 3, |i, k| samples[i].0.powi(k as i32));
    let y = Mat::<f64>::from_fn(samples.len(), 1, |i, _| samples[i].1);
    let coef = a.qr().solve_lstsq(&y);
    let residual = samples
        .iter()
        .map(|(r, w)| (w - (coef[(0, 0)] + coef[(1, 0)] * r + coef[(2, 0)] * r * r)).abs())
        .fold(0.0, f64::max);
    Ok(EnergyReport {
        value: coef[(0, 0)],
        method: EnergyMethod::RhoLimit,
        breakdown: None,
        error_estimate: residual,
        samples,
    })
}

/// Geometric radii from `max` down by `ratio`, `count` values.
pub fn geometric_schedule(max: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| max * ratio.powi(k as i32)).collect()
}
