//! Quadrature on triangles of a graded mesh, including rules adapted to
//! point singularities of the form `|x - x0|^{-p}`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::geometry::Mesh;
use crate::{cross, dot, sub, Point};
#[cfg(test)]
use crate::dist;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub point: Point,
    pub weight: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n == 1 {
        x[0] = 0.0;
        w[0] = 2.0;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(xi, wi)| (m + h * xi, h * wi)).collect()
}

// 7-point rule exact for polynomials of degree 5 (barycentric coordinates, weights sum to 1).
const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_3;
const W0: f64 = 0.225;
const W1: f64 = 0.132_394_152_788_506_2;
const W2: f64 = 0.125_939_180_544_827_1;
const TRI7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

fn tri_area(c: &[Point; 3]) -> f64 {
    0.5 * cross(sub(c[1], c[0]), sub(c[2], c[0])).abs()
}

/// Degree-5 rule on one triangle.
pub fn triangle_rule(c: &[Point; 3]) -> Vec<Node> {
    let area = tri_area(c);
    TRI7.iter()
        .map(|(l, w)| Node {
            point: [
                l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
                l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
            ],
            weight: w * area,
        })
        .collect()
}

/// Degree-5 rule on the `4^levels` congruent subtriangles.
pub fn subdivided_rule(c: &[Point; 3], levels: u32) -> Vec<Node> {
    let mut tris = vec![*c];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, d] in tris {
            let mid = |p: Point, q: Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let (ab, bd, da) = (mid(a, b), mid(b, d), mid(d, a));
            next.extend([[a, ab, da], [ab, b, bd], [da, bd, d], [ab, bd, da]]);
        }
        tris = next;
    }
    tris.iter().flat_map(triangle_rule).collect()
}

/// Distance along the ray `c + r u` to each triangle edge it crosses.
fn ray_hits(c: Point, u: Point, tri: &[Point; 3]) -> ([f64; 3], usize) {
    let mut hits = [0.0; 3];
    let mut n = 0;
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let e = sub(b, a);
        let den = cross(u, e);
        if den.abs() < 1e-300 {
            continue;
        }
        let ac = sub(a, c);
        let r = cross(ac, e) / den;
        let s = cross(ac, u) / den;
        if (-1e-12..=1.0 + 1e-12).contains(&s) && r > 0.0 {
            hits[n] = r;
            n += 1;
        }
    }
    (hits, n)
}

/// Angle of the perpendicular foot on the edge `ab` seen from `c`, followed by
/// cuts graded geometrically toward the far parts of the edge, so that each
/// angular piece sees a radial limit varying by at most a factor of about two.
fn foot_cuts(c: Point, a: Point, b: Point) -> Vec<f64> {
    let e = sub(b, a);
    let len2 = dot(e, e);
    let s = dot(sub(c, a), e) / len2;
    if s <= 0.0 || s >= 1.0 {
        return Vec::new();
    }
    let f = [a[0] + s * e[0] - c[0], a[1] + s * e[1] - c[1]];
    let d = f[0].hypot(f[1]);
    let base = f[1].atan2(f[0]);
    let mut out = vec![base];
    if d == 0.0 {
        return out;
    }
    let len = len2.sqrt();
    // the edge direction seen from the foot, turning counterclockwise from `f`
    let turn = cross(f, e).signum();
    for (reach, sign) in [(s * len, -turn), ((1.0 - s) * len, turn)] {
        let mut t = 1.0;
        while t * d < reach {
            out.push(base + sign * t.atan());
            t *= 2.0;
        }
    }
    out
}

/// Polar rule centered at `c` over `T minus B(c, r_min)`, Gauss in angle and in `ln r`.
///
/// The angular range is split where the radial limits are not smooth, so the
/// rule integrates `r^{-q} f` with smooth `f` to high accuracy even when `c`
/// lies inside or very close to the triangle.
pub fn polar_rule(tri: &[Point; 3], c: Point, r_min: f64, n_theta: usize, n_s: usize) -> Vec<Node> {
    let inside = {
        let d = cross(sub(tri[1], tri[0]), sub(tri[2], tri[0]));
        (0..3).all(|k| cross(sub(tri[(k + 1) % 3], tri[k]), sub(c, tri[k])) * d >= 0.0)
    };
    let mut cuts: Vec<f64> = tri.iter().map(|v| (v[1] - c[1]).atan2(v[0] - c[0])).collect();
    for k in 0..3 {
        cuts.extend(foot_cuts(c, tri[k], tri[(k + 1) % 3]));
    }
    let ranges: Vec<(f64, f64)> = if inside {
        let base = cuts[0];
        let mut rel: Vec<f64> = cuts.iter().map(|a| (a - base).rem_euclid(TAU)).collect();
        rel.push(TAU);
        rel.sort_by(f64::total_cmp);
        rel.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        rel.windows(2).map(|w| (base + w[0], base + w[1])).collect()
    } else {
        let g = [
            (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0 - c[0],
            (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0 - c[1],
        ];
        let base = g[1].atan2(g[0]);
        let mut rel: Vec<f64> = cuts.iter().map(|a| crate::geometry::principal_angle(a - base)).collect();
        rel.sort_by(f64::total_cmp);
        rel.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let (lo, hi) = (rel[0], *rel.last().unwrap());
        rel.retain(|a| *a >= lo && *a <= hi);
        rel.windows(2).map(|w| (base + w[0], base + w[1])).collect()
    };
    let (tx, tw) = gauss_legendre(n_theta);
    let (sx, sw) = gauss_legendre(n_s);
    let mut out = Vec::with_capacity(ranges.len() * n_theta * n_s);
    for (a, b) in ranges {
        let (tm, th) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in tx.iter().zip(&tw) {
            let th_ = tm + th * xi;
            let u = [th_.cos(), th_.sin()];
            let (hits, n) = ray_hits(c, u, tri);
            let (r_in, r_out) = if inside {
                if n == 0 {
                    continue;
                }
                (r_min, hits[..n].iter().copied().fold(f64::INFINITY, f64::min))
            } else {
                if n < 2 {
                    continue;
                }
                let lo = hits[..n].iter().copied().fold(f64::INFINITY, f64::min);
                let hi = hits[..n].iter().copied().fold(0.0, f64::max);
                (lo.max(r_min), hi)
            };
            if r_out <= r_in {
                continue;
            }
            if r_in == 0.0 {
                for (yj, wj) in sx.iter().zip(&sw) {
                    let r = 0.5 * r_out * (1.0 + yj);
                    out.push(Node { point: [c[0] + r * u[0], c[1] + r * u[1]], weight: th * wi * 0.5 * r_out * wj * r });
                }
                continue;
            }
            let (s0, s1) = (r_in.ln(), r_out.ln());
            let (sm, sh) = (0.5 * (s0 + s1), 0.5 * (s1 - s0));
            for (yj, wj) in sx.iter().zip(&sw) {
                let r = (sm + sh * yj).exp();
                out.push(Node { point: [c[0] + r * u[0], c[1] + r * u[1]], weight: th * wi * sh * wj * r * r });
            }
        }
    }
    out
}

/// Excised disk around a vortex inside a triangle; its contribution is integrated analytically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Core {
    pub vortex: usize,
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TriangleRule {
    pub nodes: Vec<Node>,
    pub core: Option<Core>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleOptions {
    /// Polar rule when the distance to a vortex is below `near_factor * diam`.
    pub near_factor: f64,
    /// Subdivided rule when the distance is below `mid_factor * diam`.
    pub mid_factor: f64,
    pub n_theta: usize,
    pub n_s: usize,
    /// Core radius as a fraction of the vortex distance to the triangle edges.
    pub core_fraction: f64,
}

impl Default for RuleOptions {
    fn default() -> Self {
        Self { near_factor: 2.0, mid_factor: 6.0, n_theta: 6, n_s: 6, core_fraction: 0.5 }
    }
}

pub(crate) fn point_triangle_distance(p: Point, tri: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| crate::geometry::segment_distance_pub(p, tri[k], tri[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

/// Per-triangle rules for integrands singular like `|x - x_j|^{-p}` at the vortices.
///
/// Each vortex gets a core disk inside its containing triangle; the disk is
/// excised from every polar rule centered at that vortex.
pub fn vortex_adapted_rules(mesh: &Mesh, vortices: &[Point], opts: &RuleOptions) -> Vec<TriangleRule> {
    let cores: Vec<Option<Core>> = vortices
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let (t, _) = mesh.locate(*x)?;
            let tri = mesh.corners(t);
            let r = (opts.core_fraction * point_triangle_distance(*x, &tri)).max(1e-14 * mesh.diameter(t));
            Some(Core { vortex: j, center: *x, radius: r })
        })
        .collect();
    let home: Vec<Option<usize>> = vortices.iter().map(|x| mesh.locate(*x).map(|(t, _)| t)).collect();
    (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.corners(t);
            let diam = mesh.diameter(t);
            if let Some(j) = home.iter().position(|h| *h == Some(t)) {
                let core = cores[j].expect("located vortex");
                return TriangleRule {
                    nodes: polar_rule(&tri, core.center, core.radius, opts.n_theta + 2, 2 * opts.n_s),
                    core: Some(core),
                };
            }
            let nearest = vortices
                .iter()
                .map(|x| point_triangle_distance(*x, &tri))
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match nearest {
                Some((j, d)) if d < opts.near_factor * diam => {
                    let r_min = cores[j].map_or(0.0, |c| c.radius);
                    TriangleRule { nodes: polar_rule(&tri, vortices[j], r_min, opts.n_theta, opts.n_s), core: None }
                }
                Some((_, d)) if d < opts.mid_factor * diam => {
                    TriangleRule { nodes: subdivided_rule(&tri, 1), core: None }
                }
                _ => TriangleRule { nodes: triangle_rule(&tri), core: None },
            }
        })
        .collect()
}

/// Exact `int_a^b ln|x - x0| ds` along the segment from `a` to `b`.
pub fn log_segment_integral(a: Point, b: Point, x0: Point) -> f64 {
    let e = sub(b, a);
    let len = e[0].hypot(e[1]);
    if len == 0.0 {
        return 0.0;
    }
    let u = [e[0] / len, e[1] / len];
    let w = sub(x0, a);
    let s0 = dot(w, u);
    let d = cross(u, w).abs();
    let prim = |x: f64| {
        let r2 = x * x + d * d;
        let lg = if r2 > 0.0 { x * r2.ln() } else { 0.0 };
        let at = if d > 0.0 { 2.0 * d * (x / d).atan() } else { 0.0 };
        0.5 * (lg - 2.0 * x + at)
    };
    prim(len - s0) - prim(-s0)
}

/// Exact `int_T grad^perp (ln|x - x0|) dx`.
pub fn triangle_perp_log_gradient(tri: &[Point; 3], x0: Point) -> Point {
    let mut acc = [0.0, 0.0];
    let d = cross(sub(tri[1], tri[0]), sub(tri[2], tri[0])).signum();
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let e = sub(b, a);
        let len = e[0].hypot(e[1]);
        let i = log_segment_integral(a, b, x0);
        acc[0] += d * i * e[0] / len;
        acc[1] += d * i * e[1] / len;
    }
    acc
}

/// Trapezoid nodes on the circle `|x - c| = r` (weights are arc length).
pub fn circle_nodes(c: Point, r: f64, n: usize) -> Vec<(Point, Point, f64)> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            let (s, co) = t.sin_cos();
            ([c[0] + r * co, c[1] + r * s], [-s, co], TAU * r / n as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn triangle_rule_degree_five() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // int x^a y^b over the unit simplex = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = triangle_rule(&t).iter().map(|n| n.weight * n.point[0].powi(a as i32) * n.point[1].powi(b as i32)).sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "{a} {b}");
            }
        }
        let s: f64 = subdivided_rule(&t, 2).iter().map(|n| n.weight).sum();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polar_rule_areas() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.2, 0.9]];
        for c in [[0.4, 0.3], [1.5, 0.2], [0.5, -0.01], [0.4, 1e-7]] {
            let a: f64 = polar_rule(&t, c, 0.0, 8, 8).iter().map(|n| n.weight).sum();
            assert!((a - 0.45).abs() < 1e-8, "center {c:?}: {a}");
        }
        let a: f64 = polar_rule(&t, [0.4, 0.3], 0.01, 8, 8).iter().map(|n| n.weight).sum();
        assert!((a - (0.45 - PI * 1e-4)).abs() < 1e-8);
    }

    fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        let g = |n| gauss_interval(n, a, b).iter().map(|(x, w)| w * f(*x)).sum::<f64>();
        let (lo, hi) = (g(7), g(14));
        if (lo - hi).abs() < tol * (b - a) || b - a < 1e-9 {
            hi
        } else {
            let m = 0.5 * (a + b);
            adaptive(f, a, m, tol) + adaptive(f, m, b, tol)
        }
    }

    #[test]
    fn polar_rule_singular_integrand() {
        // int over T minus B(c, r0) of |x - c|^{-p}, exact value from the edge-wise angular integral
        let p = 1.975;
        let t = [[0.0, 0.0], [1.0, 0.1], [0.2, 0.9]];
        for c in [[0.4, 0.3], [0.5, 0.0501]] {
            let r0 = 0.5 * point_triangle_distance(c, &t);
            let mut exact = -TAU * r0.powf(2.0 - p) / (2.0 - p);
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let (ta, tb) = ((a[1] - c[1]).atan2(a[0] - c[0]), (b[1] - c[1]).atan2(b[0] - c[0]));
                let span = (tb - ta).rem_euclid(TAU);
                let f = |s: f64| {
                    let u = [(ta + s).cos(), (ta + s).sin()];
                    let (h, n) = ray_hits(c, u, &t);
                    h[..n].iter().copied().fold(f64::INFINITY, f64::min).powf(2.0 - p) / (2.0 - p)
                };
                exact += adaptive(&f, 0.0, span, 1e-13);
            }
            let q: f64 = polar_rule(&t, c, r0, 8, 12).iter().map(|n| n.weight * dist(n.point, c).powf(-p)).sum();
            assert!(((q - exact) / exact).abs() < 1e-9, "{q} vs {exact}");
        }
        let outside = [0.5, -0.02];
        let q: f64 = polar_rule(&t, outside, 0.0, 6, 6).iter().map(|n| n.weight * dist(n.point, outside).powf(-p)).sum();
        let fine: f64 = subdivided_rule(&t, 7).iter().map(|n| n.weight * dist(n.point, outside).powf(-p)).sum();
        assert!(((q - fine) / fine).abs() < 1e-4, "{q} vs {fine}");
    }

    #[test]
    fn log_segment_matches_quadrature() {
        let (a, b) = ([0.1, -0.3], [0.7, 0.4]);
        // x0 on the segment, reference from arbitrary-precision quadrature
        assert!((log_segment_integral(a, b, [0.4, 0.05]) + 1.63592209517407).abs() < 1e-13);
        for x0 in [[0.0, 0.0], [0.1, -0.3], [2.0, 1.0]] {
            let exact = log_segment_integral(a, b, x0);
            let len = dist(a, b);
            let q: f64 = gauss_interval(400, 0.0, 1.0)
                .iter()
                .map(|(s, w)| w * len * dist([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], x0).ln())
                .sum();
            assert!((exact - q).abs() < 1e-5, "{x0:?}: {exact} vs {q}");
        }
    }

    #[test]
    fn perp_log_gradient_against_polar() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]];
        for x0 in [[0.4, 0.3], [1.2, 0.9]] {
            let exact = triangle_perp_log_gradient(&t, x0);
            let mut q = [0.0, 0.0];
            for n in polar_rule(&t, x0, 0.0, 16, 16) {
                let d = sub(n.point, x0);
                let r2 = dot(d, d);
                q[0] += n.weight * (-d[1] / r2);
                q[1] += n.weight * (d[0] / r2);
            }
            assert!((exact[0] - q[0]).abs() < 1e-9 && (exact[1] - q[1]).abs() < 1e-9, "{exact:?} {q:?}");
        }
    }
}
