//! P1 Laplace solvers on triangle meshes and a Poisson-kernel oracle on the unit disk.

mod sparse;

use std::f64::consts::TAU;
use std::fmt::Write as _;

pub use sparse::{element_matrix, Factor, SpdSystem};

use crate::geometry::Mesh;
use crate::{Error, Point, Result};

pub const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

/// Piecewise-linear field given by its vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, mesh: &Mesh, t: usize) -> Point {
        let g = mesh.basis_gradients(t);
        let tri = mesh.triangles[t];
        let mut out = [0.0, 0.0];
        for k in 0..3 {
            out[0] += self.values[tri[k]] * g[k][0];
            out[1] += self.values[tri[k]] * g[k][1];
        }
        out
    }

    pub fn value_in(&self, mesh: &Mesh, t: usize, p: Point) -> f64 {
        let l = mesh.barycentric(t, p);
        let tri = mesh.triangles[t];
        (0..3).map(|k| l[k] * self.values[tri[k]]).sum()
    }

    pub fn value_at(&self, mesh: &Mesh, p: Point) -> Result<f64> {
        let (t, _) = mesh.locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
        Ok(self.value_in(mesh, t, p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV `vertex_index,x,y,value`.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut s = String::from("vertex_index,x,y,value\n");
        for (v, (p, u)) in mesh.vertices.iter().zip(&self.values).enumerate() {
            let _ = writeln!(s, "{v},{:.16e},{:.16e},{:.16e}", p[0], p[1], u);
        }
        s
    }

    /// Area-weighted vertex averages of the triangle gradients.
    pub fn nodal_gradients(&self, mesh: &Mesh) -> Vec<Point> {
        let mut acc = vec![[0.0, 0.0, 0.0]; mesh.n_vertices()];
        for t in 0..mesh.n_triangles() {
            let g = self.gradient(mesh, t);
            let a = mesh.area(t);
            for &v in &mesh.triangles[t] {
                acc[v][0] += a * g[0];
                acc[v][1] += a * g[1];
                acc[v][2] += a;
            }
        }
        acc.iter().map(|a| [a[0] / a[2], a[1] / a[2]]).collect()
    }
}

/// Gradient at `p`: the containing triangle's gradient, or the area-weighted
/// average over the triangles sharing `p` when it lies on a vertex or edge.
pub fn gradient_at(field: &ScalarField, mesh: &Mesh, p: Point) -> Result<Point> {
    let (t, l) = mesh.locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
    let tol = 1e-10;
    if l.iter().all(|v| *v > tol) {
        return Ok(field.gradient(mesh, t));
    }
    let mut acc = [0.0, 0.0];
    let mut area = 0.0;
    for s in mesh.triangles_near(p, 1e-9) {
        let ls = mesh.barycentric(s, p);
        if ls.iter().all(|v| *v >= -tol) {
            let g = field.gradient(mesh, s);
            let a = mesh.area(s);
            acc[0] += a * g[0];
            acc[1] += a * g[1];
            area += a;
        }
    }
    Ok([acc[0] / area, acc[1] / area])
}

/// Barycentric interpolation of the nodal averages of the gradient.
pub fn recovered_gradient_at(nodal: &[Point], mesh: &Mesh, p: Point) -> Result<Point> {
    let (t, l) = mesh.locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
    let tri = mesh.triangles[t];
    let mut out = [0.0, 0.0];
    for k in 0..3 {
        out[0] += l[k] * nodal[tri[k]][0];
        out[1] += l[k] * nodal[tri[k]][1];
    }
    Ok(out)
}

/// Gradient at `center` of a harmonic field given by per-triangle gradients,
/// as the average of the gradient against the bump `(1 - r^2 / rho^2)^3`.
///
/// The bump is radial, so the average is exact for harmonic functions and
/// smooth in `center`, unlike pointwise gradient recovery.
pub fn mean_value_gradient(mesh: &Mesh, grads: impl Fn(usize) -> Point, center: Point, rho: f64) -> Point {
    let mut acc = [0.0, 0.0];
    let mut mass = 0.0;
    for t in mesh.triangles_near(center, rho) {
        let tri = mesh.corners(t);
        let levels = ((4.0 * mesh.diameter(t) / rho).log2().ceil().max(0.0) as u32).min(6);
        let mut w = 0.0;
        for node in crate::quadrature::subdivided_rule(&tri, levels) {
            let h = [node.point[0] - center[0], node.point[1] - center[1]];
            let s = 1.0 - (h[0] * h[0] + h[1] * h[1]) / (rho * rho);
            if s > 0.0 {
                w += node.weight * s * s * s;
            }
        }
        if w > 0.0 {
            let g = grads(t);
            acc[0] += w * g[0];
            acc[1] += w * g[1];
            mass += w;
        }
    }
    [acc[0] / mass, acc[1] / mass]
}

/// Discrete harmonic extension of boundary values `g(v)` given on boundary vertices.
pub fn solve_dirichlet(mesh: &Mesh, boundary: impl Fn(usize) -> f64) -> Result<ScalarField> {
    DirichletSolver::new(mesh)?.solve(mesh, boundary)
}

/// Factored Dirichlet Laplacian of one mesh, reused across many boundary data.
pub struct DirichletSolver {
    pub system: SpdSystem,
    pub values: Vec<f64>,
    pub factor: Factor,
}

impl std::fmt::Debug for DirichletSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSolver").field("dofs", &self.system.n_dofs()).finish()
    }
}

impl DirichletSolver {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let system = SpdSystem::new(mesh, |v| !mesh.is_boundary(v))?;
        let values = system.assemble(mesh, |_| IDENTITY);
        let factor = system.factor(&values)?;
        Ok(Self { system, values, factor })
    }

    pub fn solve(&self, mesh: &Mesh, boundary: impl Fn(usize) -> f64) -> Result<ScalarField> {
        dirichlet_with(mesh, &self.system, &self.values, &self.factor, boundary)
    }
}

/// `(K u)_v` for the full P1 stiffness matrix, including boundary rows.
pub fn stiffness_apply(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let k = element_matrix(mesh, t, &IDENTITY);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                out[tri[a]] += k[3 * a + b] * u[tri[b]];
            }
        }
    }
    out
}

/// Harmonic extension reusing an assembled and factored stiffness matrix.
pub fn dirichlet_with(
    mesh: &Mesh,
    system: &SpdSystem,
    values: &[f64],
    factor: &Factor,
    boundary: impl Fn(usize) -> f64,
) -> Result<ScalarField> {
    let mut u = vec![0.0; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        if system.dof(v).is_none() {
            u[v] = boundary(v);
        }
    }
    let mut rhs = vec![0.0; system.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles[t];
        if tri.iter().all(|v| system.dof(*v).is_some()) || tri.iter().all(|v| system.dof(*v).is_none()) {
            continue;
        }
        let k = element_matrix(mesh, t, &IDENTITY);
        for a in 0..3 {
            if let Some(r) = system.dof(tri[a]) {
                for b in 0..3 {
                    if system.dof(tri[b]).is_none() {
                        rhs[r] -= k[3 * a + b] * u[tri[b]];
                    }
                }
            }
        }
    }
    let x = factor.solve(&rhs);
    check_residual(system, values, &x, &rhs)?;
    for v in 0..mesh.n_vertices() {
        if let Some(d) = system.dof(v) {
            u[v] = x[d];
        }
    }
    Ok(ScalarField { values: u })
}

pub(crate) fn check_residual(system: &SpdSystem, values: &[f64], x: &[f64], rhs: &[f64]) -> Result<()> {
    let kx = system.apply(values, x);
    let res: f64 = kx.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if res > 1e-10 * scale.max(1e-300) && res > 1e-14 {
        return Err(Error::SolveFailure(format!("relative residual {:e}", res / scale)));
    }
    Ok(())
}

/// Pure Neumann problem `K u = load` with the load projected onto zero sum;
/// the returned field has zero mean over the boundary vertices weighted by arc length.
pub fn solve_neumann(mesh: &Mesh, load: &[f64]) -> Result<ScalarField> {
    NeumannSolver::new(mesh)?.solve(mesh, load)
}

/// Factored Neumann Laplacian with one pinned vertex.
pub struct NeumannSolver {
    system: SpdSystem,
    values: Vec<f64>,
    factor: Factor,
}

impl std::fmt::Debug for NeumannSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannSolver").field("dofs", &self.system.n_dofs()).finish()
    }
}

impl NeumannSolver {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let system = SpdSystem::new(mesh, |v| v != 0)?;
        let values = system.assemble(mesh, |_| IDENTITY);
        let factor = system.factor(&values)?;
        Ok(Self { system, values, factor })
    }

    pub fn solve(&self, mesh: &Mesh, load: &[f64]) -> Result<ScalarField> {
        neumann_with(mesh, &self.system, &self.values, &self.factor, load)
    }
}

fn neumann_with(mesh: &Mesh, system: &SpdSystem, values: &[f64], factor: &Factor, load: &[f64]) -> Result<ScalarField> {
    let nv = mesh.n_vertices();
    let mean = load.iter().sum::<f64>() / nv as f64;
    let mut rhs = vec![0.0; system.n_dofs()];
    for v in 0..nv {
        if let Some(d) = system.dof(v) {
            rhs[d] = load[v] - mean;
        }
    }
    let x = factor.solve(&rhs);
    check_residual(system, values, &x, &rhs)?;
    let mut u = vec![0.0; nv];
    for v in 0..nv {
        if let Some(d) = system.dof(v) {
            u[v] = x[d];
        }
    }
    let (mut s, mut len) = (0.0, 0.0);
    for e in &mesh.boundary_edges {
        let l = crate::dist(mesh.vertices[e.a], mesh.vertices[e.b]);
        s += 0.5 * l * (u[e.a] + u[e.b]);
        len += l;
    }
    let shift = s / len;
    u.iter_mut().for_each(|x| *x -= shift);
    Ok(ScalarField { values: u })
}

/// Poisson-kernel value inside the unit disk for equispaced boundary samples `f(2 pi k / N)`.
pub fn poisson_disk_oracle(samples: &[f64], p: Point) -> Result<f64> {
    let r2 = p[0] * p[0] + p[1] * p[1];
    if r2 >= 1.0 {
        return Err(Error::OutOfDomain(p[0], p[1]));
    }
    let n = samples.len();
    let mut s = 0.0;
    for (k, f) in samples.iter().enumerate() {
        let t = TAU * k as f64 / n as f64;
        let (st, ct) = t.sin_cos();
        let d2 = (ct - p[0]).powi(2) + (st - p[1]).powi(2);
        s += f * (1.0 - r2) / d2;
    }
    Ok(s / n as f64)
}

/// Poisson-kernel oracle with 2048 boundary nodes.
pub fn poisson_disk_oracle_fn(f: impl Fn(f64) -> f64, p: Point) -> Result<f64> {
    let samples: Vec<f64> = (0..2048).map(|k| f(TAU * k as f64 / 2048.0)).collect();
    poisson_disk_oracle(&samples, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, Domain};

    fn disk(h: f64) -> Mesh {
        build_mesh(&Domain::unit_disk(), &[], h, h).unwrap()
    }

    fn angle(m: &Mesh, v: usize) -> f64 {
        m.boundary_param[v].unwrap().1
    }

    #[test]
    fn zero_and_linear_data() {
        let m = disk(0.1);
        let z = solve_dirichlet(&m, |_| 0.0).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let f = solve_dirichlet(&m, |v| 3.0 * m.vertices[v][0] - m.vertices[v][1]).unwrap();
        for (v, p) in m.vertices.iter().enumerate() {
            assert!((f.values[v] - (3.0 * p[0] - p[1])).abs() < 1e-12);
        }
        let g = gradient_at(&f, &m, [0.2, 0.1]).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-10 && (g[1] + 1.0).abs() < 1e-10);
        let at_vertex = gradient_at(&f, &m, m.vertices[m.triangles[0][0]]).unwrap();
        assert!((at_vertex[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn oracle_examples() {
        assert!((poisson_disk_oracle_fn(|_| 2.5, [0.3, -0.4]).unwrap() - 2.5).abs() < 1e-14);
        assert!((poisson_disk_oracle_fn(f64::cos, [0.5, 0.0]).unwrap() - 0.5).abs() < 1e-14);
        assert!((poisson_disk_oracle_fn(|t| (2.0 * t).cos(), [0.5, 0.0]).unwrap() - 0.25).abs() < 1e-14);
        assert!(matches!(poisson_disk_oracle_fn(f64::cos, [1.0, 0.0]), Err(Error::OutOfDomain(..))));
    }

    #[test]
    fn second_order_convergence_against_oracle() {
        let data = |t: f64| (3.0 * t).cos() + 0.5 * (2.0 * t).sin();
        let err = |h: f64| {
            let m = disk(h);
            let u = solve_dirichlet(&m, |v| data(angle(&m, v))).unwrap();
            let mut e: f64 = 0.0;
            for (v, p) in m.vertices.iter().enumerate() {
                if !m.is_boundary(v) && crate::norm(*p) < 0.8 {
                    e = e.max((u.values[v] - poisson_disk_oracle_fn(data, *p).unwrap()).abs());
                }
            }
            e
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 3.5, "errors {e1} {e2}");
    }

    #[test]
    fn maximum_principle() {
        let m = build_mesh(&Domain::unit_disk(), &[[0.3, 0.0]], 0.1, 0.005).unwrap();
        let u = solve_dirichlet(&m, |v| (5.0 * angle(&m, v)).sin()).unwrap();
        assert!(u.values.iter().all(|x| *x <= 1.0 + 1e-12 && *x >= -1.0 - 1e-12));
    }

    #[test]
    fn quadratic_gradient_is_first_order() {
        let m = disk(0.05);
        let u = solve_dirichlet(&m, |v| {
            let p = m.vertices[v];
            p[0] * p[0] - p[1] * p[1]
        })
        .unwrap();
        let g = gradient_at(&u, &m, [0.2, 0.1]).unwrap();
        assert!((g[0] - 0.4).abs() < 0.05 && (g[1] + 0.2).abs() < 0.05, "{g:?}");
        let nodal = u.nodal_gradients(&m);
        let r = recovered_gradient_at(&nodal, &m, [0.2, 0.1]).unwrap();
        assert!((r[0] - 0.4).abs() < 0.01 && (r[1] + 0.2).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn neumann_recovers_harmonic_function() {
        // u = x1 has normal derivative cos(t) on the unit circle
        let m = disk(0.05);
        let mut load = vec![0.0; m.n_vertices()];
        for e in &m.boundary_edges {
            let (a, b) = (m.vertices[e.a], m.vertices[e.b]);
            let len = crate::dist(a, b);
            for (s, w) in crate::quadrature::gauss_interval(4, 0.0, 1.0) {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let flux = x[0] / crate::norm(x);
                load[e.a] += w * len * (1.0 - s) * flux;
                load[e.b] += w * len * s * flux;
            }
        }
        let u = solve_neumann(&m, &load).unwrap();
        let e = m.vertices.iter().zip(&u.values).map(|(p, v)| (p[0] - v).abs()).fold(0.0, f64::max);
        assert!(e < 5e-3, "max error {e}");
    }
}
