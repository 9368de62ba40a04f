use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::quadrature::{vortex_adapted_rules, RuleOptions};
use crate::vortex::CanonicalMap;
use crate::{dot, Point};

/// Core disk of a vortex: the current there is `d e_theta / r + b` with `b`
/// the constant regular part, and the energy is integrated analytically.
#[derive(Clone, Copy, Debug)]
struct CoreTerm {
    degree: f64,
    radius: f64,
    /// Regular current at the vortex, excluding `grad phi`.
    regular: Point,
}

/// Quadrature of `F(phi) = int |grad phi + j u_x|^p` for a fixed canonical map.
#[derive(Clone, Debug)]
pub struct EnergyQuadrature {
    offsets: Vec<usize>,
    currents: Vec<Point>,
    weights: Vec<f64>,
    cores: Vec<CoreTerm>,
    core_of: Vec<Option<usize>>,
    median_current: f64,
}

/// Value, gradient with respect to the triangle gradient, and 2x2 Hessian.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Local {
    pub energy: f64,
    pub grad: Point,
    pub hess: [[f64; 2]; 2],
}

#[inline]
fn density(p: f64, eps: f64, v: Point, want_derivs: bool) -> Local {
    let s = dot(v, v) + eps * eps;
    if s == 0.0 {
        return Local::default();
    }
    let a = s.powf(0.5 * p - 1.0);
    let energy = s * a;
    if !want_derivs {
        return Local { energy, ..Local::default() };
    }
    let c = p * a;
    let q = (p - 2.0) / s;
    Local {
        energy,
        grad: [c * v[0], c * v[1]],
        hess: [
            [c * (1.0 + q * v[0] * v[0]), c * q * v[0] * v[1]],
            [c * q * v[0] * v[1], c * (1.0 + q * v[1] * v[1])],
        ],
    }
}

impl EnergyQuadrature {
    pub fn new(map: &CanonicalMap, opts: &RuleOptions) -> Self {
        let mesh = map.mesh();
        let rules = vortex_adapted_rules(mesh, map.config.points(), opts);
        let mut offsets = Vec::with_capacity(rules.len() + 1);
        offsets.push(0);
        let mut currents = Vec::new();
        let mut weights = Vec::new();
        let mut cores = Vec::new();
        let mut core_of = vec![None; rules.len()];
        let per_triangle: Vec<Vec<(Point, f64)>> = rules
            .par_iter()
            .enumerate()
            .map(|(t, r)| r.nodes.iter().map(|n| (map.current_in(t, n.point), n.weight)).collect())
            .collect();
        for (t, (rule, nodes)) in rules.iter().zip(per_triangle).enumerate() {
            for (j, w) in nodes {
                currents.push(j);
                weights.push(w);
            }
            offsets.push(currents.len());
            if let Some(core) = rule.core {
                let degree = map.config.degrees()[core.vortex] as f64;
                core_of[t] = Some(cores.len());
                cores.push(CoreTerm { degree, radius: core.radius, regular: regular_at(map, t, core.vortex) });
            }
        }
        let mut mags: Vec<f64> = currents.iter().map(|j| j[0].hypot(j[1])).collect();
        let median_current = if mags.is_empty() {
            0.0
        } else {
            let mid = mags.len() / 2;
            *mags.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        Self { offsets, currents, weights, cores, core_of, median_current }
    }

    pub fn median_current(&self) -> f64 {
        self.median_current
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    /// Per-triangle contributions for triangle gradients `g`, regularized by `eps`.
    pub(crate) fn locals(&self, p: f64, eps: f64, g: &[Point], want_derivs: bool) -> Vec<Local> {
        (0..g.len())
            .into_par_iter()
            .map(|t| {
                let mut acc = Local::default();
                for k in self.offsets[t]..self.offsets[t + 1] {
                    let j = self.currents[k];
                    let w = self.weights[k];
                    let l = density(p, eps, [g[t][0] + j[0], g[t][1] + j[1]], want_derivs);
                    acc.energy += w * l.energy;
                    if want_derivs {
                        acc.grad[0] += w * l.grad[0];
                        acc.grad[1] += w * l.grad[1];
                        for a in 0..2 {
                            for b in 0..2 {
                                acc.hess[a][b] += w * l.hess[a][b];
                            }
                        }
                    }
                }
                if let Some(c) = self.core_of[t] {
                    let core = &self.cores[c];
                    let b = [g[t][0] + core.regular[0], g[t][1] + core.regular[1]];
                    let d = core.degree.abs();
                    let rc = core.radius;
                    let lead = TAU * d.powf(p) * rc.powf(2.0 - p) / (2.0 - p);
                    let k = TAU * d.powf(p - 2.0) * 0.25 * p * p * rc.powf(4.0 - p) / (4.0 - p);
                    acc.energy += lead + k * dot(b, b);
                    if want_derivs {
                        acc.grad[0] += 2.0 * k * b[0];
                        acc.grad[1] += 2.0 * k * b[1];
                        acc.hess[0][0] += 2.0 * k;
                        acc.hess[1][1] += 2.0 * k;
                    }
                }
                acc
            })
            .collect()
    }

    /// `F(phi)` at `eps = 0` from triangle gradients.
    pub fn energy(&self, p: f64, g: &[Point]) -> f64 {
        self.locals(p, 0.0, g, false).iter().map(|l| l.energy).sum()
    }
}

/// Regular current at vortex `j` excluding `grad phi`: anchors and the other vortices.
fn regular_at(map: &CanonicalMap, t: usize, j: usize) -> Point {
    let x = map.config.points()[j];
    let mut r = map.regular_in(t, x);
    for (k, (y, d)) in map.config.points().iter().zip(map.config.degrees()).enumerate() {
        if k != j {
            let h = [x[0] - y[0], x[1] - y[1]];
            let r2 = dot(h, h);
            r[0] -= *d as f64 * h[1] / r2;
            r[1] += *d as f64 * h[0] / r2;
        }
    }
    r
}
