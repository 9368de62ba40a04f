use std::collections::HashMap;
use std::f64::consts::TAU;

use faer::Mat;

use crate::{Error, Result};

/// Brouwer degree of a field on the boundary of a product ball.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeCertificate {
    pub label: String,
    pub center: Vec<f64>,
    pub radius: f64,
    pub samples: usize,
    pub degree: i64,
    /// Smallest field norm over the evaluated boundary points.
    pub min_norm: f64,
    pub evaluations: usize,
}

impl DegreeCertificate {
    pub fn to_text(&self) -> String {
        format!(
            "label = {}\nradius = {:.16e}\nsamples = {}\ndegree = {}\nmin_norm = {:.16e}\nevaluations = {}\n",
            self.label, self.radius, self.samples, self.degree, self.min_norm, self.evaluations
        )
    }
}

/// Degree of `field` on the boundary of the product of disks of `radius`
/// around the point pairs of `center` (length 2 or 4).
///
/// Boundary values with norm below `10 * noise_floor` make the degree undefined.
pub fn brouwer_degree<F>(
    label: &str,
    field: F,
    center: &[f64],
    radius: f64,
    samples_per_dim: usize,
    noise_floor: f64,
) -> Result<DegreeCertificate>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(radius > 0.0) || samples_per_dim < 4 {
        return Err(Error::InvalidConfig("degree needs a positive radius and at least 4 samples".into()));
    }
    let (degree, min_norm, evaluations) = match center.len() {
        2 => degree_2d(field, center, radius, samples_per_dim, noise_floor)?,
        4 => degree_4d(field, center, radius, samples_per_dim, noise_floor)?,
        n => return Err(Error::InvalidConfig(format!("certified degree needs dimension 2 or 4, got {n}"))),
    };
    Ok(DegreeCertificate {
        label: label.to_string(),
        center: center.to_vec(),
        radius,
        samples: samples_per_dim,
        degree,
        min_norm,
        evaluations,
    })
}

fn checked<F>(field: &mut F, x: &[f64], dim: usize, floor: f64, min_norm: &mut f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let v = field(x)?;
    if v.len() != dim {
        return Err(Error::InvalidConfig(format!("field returned {} components, expected {dim}", v.len())));
    }
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    *min_norm = min_norm.min(n);
    if !(n > 10.0 * floor) {
        return Err(Error::DegreeUndefined(format!("field norm {n:.3e} at a boundary sample is below 10x the noise floor {floor:.3e}")));
    }
    Ok(v)
}

/// Winding of the field along the circle, refining where the angle jumps.
fn degree_2d<F>(mut field: F, c: &[f64], r: f64, n: usize, floor: f64) -> Result<(i64, f64, usize)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut min_norm = f64::INFINITY;
    let mut evals = 0;
    let mut eval = |t: f64, field: &mut F, min_norm: &mut f64| -> Result<f64> {
        evals += 1;
        let v = checked(field, &[c[0] + r * t.cos(), c[1] + r * t.sin()], 2, floor, min_norm)?;
        Ok(v[1].atan2(v[0]))
    };
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::new();
    let first = eval(0.0, &mut field, &mut min_norm)?;
    let mut prev = first;
    for k in 1..=n {
        let t = TAU * k as f64 / n as f64;
        let a = if k == n { first } else { eval(t, &mut field, &mut min_norm)? };
        stack.push((TAU * (k - 1) as f64 / n as f64, t, prev, a, 0));
        while let Some((t0, t1, a0, a1, depth)) = stack.pop() {
            let d = crate::geometry::principal_angle(a1 - a0);
            if d.abs() <= std::f64::consts::FRAC_PI_4 {
                total += d;
                continue;
            }
            if depth >= 12 {
                return Err(Error::DegreeUndefined("field angle does not resolve under refinement".into()));
            }
            let tm = 0.5 * (t0 + t1);
            let am = eval(tm, &mut field, &mut min_norm)?;
            stack.push((tm, t1, am, a1, depth + 1));
            stack.push((t0, tm, a0, am, depth + 1));
        }
        prev = a;
    }
    let w = total / TAU;
    if (w - w.round()).abs() > 1e-6 {
        return Err(Error::DegreeUndefined(format!("non-integer winding {w}")));
    }
    Ok((w.round() as i64, min_norm, evals))
}

/// Unit disk grid: center, then `rings` rings of `m` points; the last ring is the circle.
struct DiskGrid {
    points: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    m: usize,
}

impl DiskGrid {
    fn new(m: usize, rings: usize) -> Self {
        let mut points = vec![[0.0, 0.0]];
        for k in 1..=rings {
            let s = k as f64 / rings as f64;
            for i in 0..m {
                let t = TAU * i as f64 / m as f64;
                points.push([s * t.cos(), s * t.sin()]);
            }
        }
        let idx = |k: usize, i: usize| 1 + (k - 1) * m + i % m;
        let mut triangles = Vec::new();
        for i in 0..m {
            triangles.push([0, idx(1, i), idx(1, i + 1)]);
        }
        for k in 1..rings {
            for i in 0..m {
                triangles.push([idx(k, i), idx(k + 1, i), idx(k + 1, i + 1)]);
                triangles.push([idx(k, i), idx(k + 1, i + 1), idx(k, i + 1)]);
            }
        }
        for t in &mut triangles {
            t.sort_unstable();
        }
        Self { points, triangles, m }
    }

    fn circle(&self, i: usize) -> usize {
        self.points.len() - self.m + i % self.m
    }
}

fn det4(rows: [[f64; 4]; 4]) -> f64 {
    Mat::<f64>::from_fn(4, 4, |i, j| rows[i][j]).determinant()
}

/// Ray-crossing count of `F / |F|` over a triangulation of the product-ball boundary.
fn degree_4d<F>(mut field: F, c: &[f64], r: f64, m: usize, floor: f64) -> Result<(i64, f64, usize)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let grid = DiskGrid::new(m, (m / 4).max(1));
    let coords = |a: usize, b: usize| -> [f64; 4] {
        let (p, q) = (grid.points[a], grid.points[b]);
        [c[0] + r * p[0], c[1] + r * p[1], c[2] + r * q[0], c[3] + r * q[1]]
    };
    // (factor-1 disk index, factor-2 disk index, outward normal on factor 2)
    let mut tets: Vec<([(usize, usize); 4], bool)> = Vec::new();
    let seg = |i: usize| {
        let (a, b) = (grid.circle(i), grid.circle(i + 1));
        (a.min(b), a.max(b))
    };
    for i in 0..m {
        let (s0, s1) = seg(i);
        let s = [s0, s1];
        for t in &grid.triangles {
            for path in [[(0, 0), (1, 0), (1, 1), (1, 2)], [(0, 0), (0, 1), (1, 1), (1, 2)], [(0, 0), (0, 1), (0, 2), (1, 2)]] {
                tets.push((path.map(|(a, b)| (s[a], t[b])), false));
            }
            for path in [[(0, 0), (1, 0), (2, 0), (2, 1)], [(0, 0), (1, 0), (1, 1), (2, 1)], [(0, 0), (0, 1), (1, 1), (2, 1)]] {
                tets.push((path.map(|(a, b)| (t[a], s[b])), true));
            }
        }
    }
    let mut values: HashMap<(usize, usize), [f64; 4]> = HashMap::new();
    let mut min_norm = f64::INFINITY;
    let mut order: Vec<(usize, usize)> = tets.iter().flat_map(|(v, _)| v.iter().copied()).collect();
    order.sort_unstable();
    order.dedup();
    for key in &order {
        let v = checked(&mut field, &coords(key.0, key.1), 4, floor, &mut min_norm)?;
        values.insert(*key, [v[0], v[1], v[2], v[3]]);
    }
    let directions = [[0.3141, -0.5926, 0.5358, 0.9793], [-0.7071, 0.2236, 0.4142, -0.5773]];
    let mut degrees = Vec::new();
    for e in directions {
        let mut count = 0i64;
        for (verts, second) in &tets {
            let x: Vec<[f64; 4]> = verts.iter().map(|k| coords(k.0, k.1)).collect();
            let f: Vec<[f64; 4]> = verts.iter().map(|k| values[k]).collect();
            let centroid: Vec<f64> = (0..4).map(|d| x.iter().map(|p| p[d]).sum::<f64>() / 4.0).collect();
            let mut n = [0.0; 4];
            let o = if *second { 2 } else { 0 };
            let (u, w) = (centroid[o] - c[o], centroid[o + 1] - c[o + 1]);
            let l = u.hypot(w);
            n[o] = u / l;
            n[o + 1] = w / l;
            let edge = |k: usize| [x[k][0] - x[0][0], x[k][1] - x[0][1], x[k][2] - x[0][2], x[k][3] - x[0][3]];
            let orient = det4([n, edge(1), edge(2), edge(3)]).signum();
            let a = Mat::<f64>::from_fn(4, 4, |i, j| if j < 3 { f[j + 1][i] - f[0][i] } else { -e[i] });
            let rhs = Mat::<f64>::from_fn(4, 1, |i, _| -f[0][i]);
            let sol = faer::linalg::solvers::Solve::solve(&a.partial_piv_lu(), &rhs);
            let (l1, l2, l3, s) = (sol[(0, 0)], sol[(1, 0)], sol[(2, 0)], sol[(3, 0)]);
            if !(l1.is_finite() && l2.is_finite() && l3.is_finite() && s.is_finite()) {
                continue;
            }
            if l1 >= 0.0 && l2 >= 0.0 && l3 >= 0.0 && l1 + l2 + l3 <= 1.0 && s > 0.0 {
                count += (orient * det4([f[0], f[1], f[2], f[3]]).signum()) as i64;
            }
        }
        degrees.push(count);
    }
    if degrees[0] != degrees[1] {
        return Err(Error::DegreeUndefined(format!("ray counts disagree: {degrees:?}")));
    }
    Ok((degrees[0], min_norm, order.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_identity_and_reflection() {
        let id = brouwer_degree("id", |x| Ok(vec![x[0] - 0.1, x[1]]), &[0.1, 0.0], 0.1, 8, 1e-12).unwrap();
        assert_eq!(id.degree, 1);
        let refl = brouwer_degree("refl", |x| Ok(vec![x[0], -x[1]]), &[0.0, 0.0], 0.1, 8, 1e-12).unwrap();
        assert_eq!(refl.degree, -1);
        let sq = brouwer_degree("sq", |x| Ok(vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]]), &[0.0, 0.0], 1.0, 4, 1e-12).unwrap();
        assert_eq!(sq.degree, 2);
        let none = brouwer_degree("shift", |x| Ok(vec![x[0] + 1.0, x[1]]), &[0.0, 0.0], 0.5, 8, 1e-12).unwrap();
        assert_eq!(none.degree, 0);
        assert!((none.min_norm - 0.5).abs() < 1e-12);
    }

    #[test]
    fn four_dimensional_degrees() {
        let c = [0.2, -0.1, 0.5, 0.3];
        let shifted = |x: &[f64]| [x[0] - c[0], x[1] - c[1], x[2] - c[2], x[3] - c[3]];
        let id = brouwer_degree("id", |x| Ok(shifted(x).to_vec()), &c, 0.1, 8, 1e-12).unwrap();
        assert_eq!(id.degree, 1);
        let refl = brouwer_degree("refl", |x| { let y = shifted(x); Ok(vec![y[0], -y[1], y[2], y[3]]) }, &c, 0.1, 8, 1e-12).unwrap();
        assert_eq!(refl.degree, -1);
        let sq = brouwer_degree(
            "sq",
            |x| { let y = shifted(x); Ok(vec![y[0] * y[0] - y[1] * y[1], 2.0 * y[0] * y[1], y[2], y[3]]) },
            &c,
            0.1,
            8,
            1e-12,
        )
        .unwrap();
        assert_eq!(sq.degree, 2);
        let none = brouwer_degree("shift", |x| { let y = shifted(x); Ok(vec![y[0] + 1.0, y[1], y[2], y[3]]) }, &c, 0.1, 8, 1e-12).unwrap();
        assert_eq!(none.degree, 0);
        let linear = |x: &[f64]| {
            let y = shifted(x);
            Ok(vec![2.0 * y[0] + y[2], y[1] - y[3], -y[2] + 0.5 * y[0], 3.0 * y[3] + y[1]])
        };
        // det of the linear map is negative
        assert_eq!(brouwer_degree("lin", linear, &c, 0.1, 8, 1e-12).unwrap().degree, -1);
    }

    #[test]
    fn vanishing_boundary_is_undefined() {
        let r = brouwer_degree("zero", |x| Ok(vec![x[0] - 0.1, x[1]]), &[0.0, 0.0], 0.1, 8, 1e-12);
        assert!(matches!(r, Err(Error::DegreeUndefined(_))));
        let r = brouwer_degree("small", |x| Ok(vec![1e-9 * x[0], 1e-9 * x[1]]), &[0.0, 0.0], 0.1, 8, 1e-9);
        assert!(matches!(r, Err(Error::DegreeUndefined(_))));
    }
}
