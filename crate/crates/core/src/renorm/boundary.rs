use crate::geometry::{principal_angle, Domain, Mesh};
use crate::quadrature::gauss_interval;
use crate::{dot, sub, Point};

/// Quadrature node on a boundary edge, parametrized by the loop parameter.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundaryNode {
    pub loop_index: usize,
    pub a: usize,
    pub b: usize,
    /// Hat-function values of `a` and `b` at the chord point matching `t`.
    pub lam: [f64; 2],
    pub t: f64,
    /// Point on the exact boundary curve.
    pub x: Point,
    pub tangent: Point,
    /// Signed `dt` weight, positive when `tau` runs with increasing `t`.
    pub weight: f64,
}

/// Gauss nodes in the loop parameter over every boundary edge, following `tau`.
pub(crate) fn boundary_nodes(mesh: &Mesh, domain: &Domain, n: usize) -> Vec<BoundaryNode> {
    let mut out = Vec::with_capacity(mesh.boundary_edges.len() * n);
    for e in &mesh.boundary_edges {
        let (ta, tb) = match (mesh.boundary_param[e.a], mesh.boundary_param[e.b]) {
            (Some((_, ta)), Some((_, tb))) => (ta, tb),
            _ => continue,
        };
        let tb = ta + principal_angle(tb - ta);
        let (pa, pb) = (mesh.vertices[e.a], mesh.vertices[e.b]);
        let chord = sub(pb, pa);
        let len2 = dot(chord, chord);
        for (t, w) in gauss_interval(n, ta, tb) {
            let x = domain.loop_point(e.component, t);
            let s = (dot(sub(x, pa), chord) / len2).clamp(0.0, 1.0);
            out.push(BoundaryNode {
                loop_index: e.component,
                a: e.a,
                b: e.b,
                lam: [1.0 - s, s],
                t,
                x,
                tangent: domain.loop_derivative(e.component, t),
                weight: w,
            });
        }
    }
    out
}
