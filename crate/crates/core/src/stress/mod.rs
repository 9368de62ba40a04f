//! Stress-energy tensor of the relaxed maps and the defect coefficients
//! obtained by pairing its divergence with cutoff test fields.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::laplace::ScalarField;
use crate::pharmonic::PharmonicSolution;
use crate::quadrature::subdivided_rule;
use crate::vortex::{CanonicalMap, CurrentField};
use crate::{dist, dot, Error, Point, Result};

/// `S_p(v) = p |v|^{p-2} v (x) v - |v|^p I` for the current `v`.
pub fn stress_tensor(p: f64, v: Point) -> [[f64; 2]; 2] {
    let s = dot(v, v);
    if s == 0.0 {
        return [[0.0; 2]; 2];
    }
    let a = s.powf(0.5 * p - 1.0);
    let vp = s * a;
    let off = p * a * v[0] * v[1];
    [[p * a * v[0] * v[0] - vp, off], [off, p * a * v[1] * v[1] - vp]]
}

/// Quintic profile of `r / delta`: 1 below 1, 0 above 2, C2 at both ends.
pub fn cutoff(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

pub fn cutoff_derivative(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        -30.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

/// Test field `chi(|x - center| / delta) e_l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestField {
    pub center: Point,
    pub delta: f64,
    pub direction: usize,
}

impl TestField {
    pub fn value(&self, x: Point) -> Point {
        let c = cutoff(dist(x, self.center) / self.delta);
        let mut out = [0.0, 0.0];
        out[self.direction] = c;
        out
    }

    /// Gradient of the cutoff; the field derivative is `e_l (x) grad chi`.
    pub fn cutoff_gradient(&self, x: Point) -> Point {
        let h = [x[0] - self.center[0], x[1] - self.center[1]];
        let r = h[0].hypot(h[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = cutoff_derivative(r / self.delta) / (self.delta * r);
        [d * h[0], d * h[1]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StressCoefficients {
    pub p: f64,
    pub points: Vec<Point>,
    pub c: Vec<Point>,
    /// Difference between two quadrature refinements.
    pub error: f64,
    pub delta: f64,
}

impl StressCoefficients {
    pub fn flat(&self) -> Vec<f64> {
        self.c.iter().flat_map(|c| [c[0], c[1]]).collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,j,c1,c2,delta,err\n");
        self.append_csv(&mut s);
        s
    }

    pub fn append_csv(&self, s: &mut String) {
        for (j, c) in self.c.iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}", self.p, j, c[0], c[1], self.delta, self.error);
        }
    }
}

/// Default cutoff radius: a quarter of the clearance.
pub fn default_delta(map: &CanonicalMap) -> f64 {
    0.25 * map.config.clearance()
}

fn check_delta(map: &CanonicalMap, delta: f64) -> Result<()> {
    let limit = 0.5 * map.config.clearance();
    if !(delta > 0.0 && delta < limit) {
        return Err(Error::BadRadius(format!("delta {delta} must lie in (0, {limit})")));
    }
    Ok(())
}

/// `-int S_p grad(chi_j) . h_j` summed over vortices, at one refinement level.
fn pairing_at(p: f64, map: &CanonicalMap, phi: Option<&ScalarField>, delta: f64, h: &[Point], extra: u32) -> f64 {
    let sites: Vec<(Point, Point)> = map.config.points().iter().copied().zip(h.iter().copied()).collect();
    pairing_sites(p, map, phi, delta, &sites, extra)
}

/// Same pairing for cutoffs centered at arbitrary `(center, h)` sites.
fn pairing_sites(p: f64, map: &CanonicalMap, phi: Option<&ScalarField>, delta: f64, sites: &[(Point, Point)], extra: u32) -> f64 {
    let mesh = map.mesh();
    let field = match phi {
        Some(phi) => CurrentField::with_correction(map, phi),
        None => CurrentField::canonical(map),
    };
    let fields: Vec<(TestField, Point)> =
        sites.iter().map(|(x, hj)| (TestField { center: *x, delta, direction: 0 }, *hj)).collect();
    let parts: Vec<f64> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.corners(t);
            let diam = mesh.diameter(t);
            let touching: Vec<&(TestField, Point)> = fields
                .iter()
                .filter(|(f, _)| {
                    let near = tri.iter().map(|v| dist(*v, f.center)).fold(f64::INFINITY, f64::min);
                    let far = tri.iter().map(|v| dist(*v, f.center)).fold(0.0, f64::max);
                    far >= f.delta && near - diam <= 2.0 * f.delta
                })
                .collect();
            if touching.is_empty() {
                return 0.0;
            }
            let levels = ((4.0 * diam / delta).log2().ceil().max(0.0) as u32 + 1 + extra).min(8);
            let mut acc = 0.0;
            for node in subdivided_rule(&tri, levels) {
                let mut pull = [0.0, 0.0];
                for (f, hj) in &touching {
                    let g = f.cutoff_gradient(node.point);
                    if g != [0.0, 0.0] {
                        let s = stress_tensor(p, field.eval_in(t, node.point));
                        pull[0] += hj[0] * (s[0][0] * g[0] + s[0][1] * g[1]);
                        pull[1] += hj[1] * (s[1][0] * g[0] + s[1][1] * g[1]);
                    }
                }
                acc += node.weight * (pull[0] + pull[1]);
            }
            acc
        })
        .collect();
    -parts.iter().sum::<f64>()
}

fn coefficients_at(p: f64, map: &CanonicalMap, phi: Option<&ScalarField>, delta: f64, extra: u32) -> Vec<Point> {
    let n = map.config.n();
    (0..n)
        .map(|j| {
            let mut c = [0.0, 0.0];
            for (l, cl) in c.iter_mut().enumerate() {
                let mut h = vec![[0.0, 0.0]; n];
                h[j][l] = 1.0;
                *cl = pairing_at(p, map, phi, delta, &h, extra);
            }
            c
        })
        .collect()
}

fn coefficients_of(p: f64, map: &CanonicalMap, phi: Option<&ScalarField>, delta: f64) -> Result<StressCoefficients> {
    check_delta(map, delta)?;
    let c = coefficients_at(p, map, phi, delta, 1);
    let coarse = coefficients_at(p, map, phi, delta, 0);
    let error = c
        .iter()
        .zip(&coarse)
        .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
        .fold(0.0, f64::max);
    Ok(StressCoefficients { p, points: map.config.points().to_vec(), c, error, delta })
}

/// Defect coefficients `c_j^l` of `u = e^{i phi} u_x`.
pub fn coefficients(p: f64, solution: &PharmonicSolution, delta: f64) -> Result<StressCoefficients> {
    if p != solution.p {
        return Err(Error::BadExponent(p));
    }
    coefficients_of(p, &solution.map, Some(&solution.phi), delta)
}

/// Defect coefficients of the canonical map itself (no correction).
pub fn canonical_coefficients(p: f64, map: &CanonicalMap, delta: f64) -> Result<StressCoefficients> {
    coefficients_of(p, map, None, delta)
}

/// Pairing with the combined field `sum_j chi_j h_j`.
pub fn pairing(solution: &PharmonicSolution, delta: f64, h: &[Point]) -> Result<f64> {
    check_delta(&solution.map, delta)?;
    if h.len() != solution.map.config.n() {
        return Err(Error::InvalidConfig("increment length must match the vortex count".into()));
    }
    Ok(pairing_at(solution.p, &solution.map, Some(&solution.phi), delta, h, 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaReport {
    pub runs: Vec<StressCoefficients>,
    pub spread: f64,
    pub threshold: f64,
}

impl DeltaReport {
    pub fn passed(&self) -> bool {
        self.spread < self.threshold
    }
}

/// Spread of the coefficients over several cutoff radii.
pub fn delta_independence_check(p: f64, solution: &PharmonicSolution, deltas: &[f64]) -> Result<DeltaReport> {
    let runs = deltas.iter().map(|d| coefficients(p, solution, *d)).collect::<Result<Vec<_>>>()?;
    Ok(delta_report(runs))
}

pub fn delta_report(runs: Vec<StressCoefficients>) -> DeltaReport {
    let mut spread: f64 = 0.0;
    for a in &runs {
        for b in &runs {
            let d = a.flat().iter().zip(b.flat()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            spread = spread.max(d);
        }
    }
    let scale = runs.iter().map(|r| r.norm()).fold(0.0, f64::max);
    DeltaReport { runs, spread, threshold: 5e-3 * (1.0 + scale) }
}
