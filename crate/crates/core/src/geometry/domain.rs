use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{cross, dist, dot, sub, Error, Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    UnitDisk,
    Annulus { r_inner: f64 },
    Polygon { vertices: Vec<Point> },
}

/// Bounded planar domain with boundary loops `0..n_components()`.
///
/// Loop 0 is the outer boundary. Every loop is parameterized by
/// `t in [0, 2pi)` running counterclockwise; the boundary orientation `tau`
/// (with `det(nu, tau) = 1`, `nu` the outward normal) agrees with that
/// parameterization on loop 0 and is opposite on inner loops.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    perimeter: f64,
}

impl Domain {
    pub fn unit_disk() -> Self {
        Self { kind: DomainKind::UnitDisk, perimeter: TAU }
    }

    pub fn annulus(r_inner: f64) -> Result<Self> {
        if !(r_inner > 0.0 && r_inner < 1.0) {
            return Err(Error::InvalidDomain(format!("annulus inner radius {r_inner} not in (0, 1)")));
        }
        Ok(Self { kind: DomainKind::Annulus { r_inner }, perimeter: TAU })
    }

    /// Simple polygon; the vertex loop is reoriented counterclockwise.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidDomain("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidDomain("non-finite polygon vertex".into()));
        }
        let area = signed_area(&vertices);
        let scale = vertices.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
        if area.abs() <= 1e-12 * scale * scale.max(1e-300) {
            return Err(Error::InvalidDomain("polygon has zero area".into()));
        }
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if dist(a, b) <= 1e-14 * scale {
                return Err(Error::InvalidDomain(format!("repeated polygon vertex {i}")));
            }
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidDomain(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let perimeter = (0..n).map(|i| dist(vertices[i], vertices[(i + 1) % n])).sum();
        Ok(Self { kind: DomainKind::Polygon { vertices }, perimeter })
    }

    pub fn from_kind(kind: DomainKind) -> Result<Self> {
        match kind {
            DomainKind::UnitDisk => Ok(Self::unit_disk()),
            DomainKind::Annulus { r_inner } => Self::annulus(r_inner),
            DomainKind::Polygon { vertices } => Self::polygon(vertices),
        }
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn n_components(&self) -> usize {
        match self.kind {
            DomainKind::Annulus { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_simply_connected(&self) -> bool {
        self.n_components() == 1
    }

    pub fn inner_radius(&self) -> Option<f64> {
        match self.kind {
            DomainKind::Annulus { r_inner } => Some(r_inner),
            _ => None,
        }
    }

    /// Reflection `x1 -> -x1` maps the domain onto itself.
    pub fn is_mirror_symmetric(&self) -> bool {
        !matches!(self.kind, DomainKind::Polygon { .. })
    }

    /// Rotations about the origin map the domain onto itself.
    pub fn is_rotation_invariant(&self) -> bool {
        !matches!(self.kind, DomainKind::Polygon { .. })
    }

    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        match &self.kind {
            DomainKind::UnitDisk => p[0] * p[0] + p[1] * p[1] < 1.0,
            DomainKind::Annulus { r_inner } => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                r2 < 1.0 && r2 > r_inner * r_inner
            }
            DomainKind::Polygon { vertices } => {
                point_in_polygon(vertices, p) && self.distance_to_boundary(p) > 0.0
            }
        }
    }

    /// Unsigned distance from `p` to the boundary.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let r = p[0].hypot(p[1]);
        match &self.kind {
            DomainKind::UnitDisk => (1.0 - r).abs(),
            DomainKind::Annulus { r_inner } => (1.0 - r).abs().min((r - r_inner).abs()),
            DomainKind::Polygon { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| segment_distance(p, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Point of loop `l` at parameter `t`.
    pub fn loop_point(&self, l: usize, t: f64) -> Point {
        match &self.kind {
            DomainKind::UnitDisk => [t.cos(), t.sin()],
            DomainKind::Annulus { r_inner } => {
                let r = if l == 0 { 1.0 } else { *r_inner };
                [r * t.cos(), r * t.sin()]
            }
            DomainKind::Polygon { vertices } => {
                let mut s = t.rem_euclid(TAU) / TAU * self.perimeter;
                let n = vertices.len();
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let len = dist(a, b);
                    if s <= len || i == n - 1 {
                        let f = (s / len).clamp(0.0, 1.0);
                        return [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
                    }
                    s -= len;
                }
                unreachable!()
            }
        }
    }

    /// Parameter in `[0, 2pi)` of the point of loop `l` nearest to `p`.
    pub fn loop_parameter(&self, l: usize, p: Point) -> f64 {
        match &self.kind {
            DomainKind::UnitDisk | DomainKind::Annulus { .. } => {
                let _ = l;
                p[1].atan2(p[0]).rem_euclid(TAU)
            }
            DomainKind::Polygon { vertices } => {
                let n = vertices.len();
                let mut best = (f64::INFINITY, 0.0);
                let mut s0 = 0.0;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let ab = sub(b, a);
                    let len2 = dot(ab, ab);
                    let f = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
                    let q = [a[0] + f * ab[0], a[1] + f * ab[1]];
                    let d = dist(p, q);
                    if d < best.0 {
                        best = (d, s0 + f * len2.sqrt());
                    }
                    s0 += len2.sqrt();
                }
                (best.1 / self.perimeter * TAU).rem_euclid(TAU)
            }
        }
    }

    /// Derivative of `loop_point(l, t)` with respect to `t`.
    pub fn loop_derivative(&self, l: usize, t: f64) -> Point {
        match &self.kind {
            DomainKind::UnitDisk | DomainKind::Annulus { .. } => {
                let r = self.loop_speed(l);
                [-r * t.sin(), r * t.cos()]
            }
            DomainKind::Polygon { vertices } => {
                let mut s = t.rem_euclid(TAU) / TAU * self.perimeter;
                let n = vertices.len();
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let len = dist(a, b);
                    if s <= len || i == n - 1 {
                        let k = self.perimeter / TAU / len;
                        return [k * (b[0] - a[0]), k * (b[1] - a[1])];
                    }
                    s -= len;
                }
                unreachable!()
            }
        }
    }

    /// Arc length per unit parameter, `ds/dt`.
    pub fn loop_speed(&self, l: usize) -> f64 {
        match &self.kind {
            DomainKind::UnitDisk => 1.0,
            DomainKind::Annulus { r_inner } => {
                if l == 0 {
                    1.0
                } else {
                    *r_inner
                }
            }
            DomainKind::Polygon { .. } => self.perimeter / TAU,
        }
    }

    /// +1 when `tau` runs with increasing parameter on loop `l`, -1 otherwise.
    pub fn orientation(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn loop_length(&self, l: usize) -> f64 {
        self.loop_speed(l) * TAU
    }

    /// Parameters of polygon corners on loop `l` (empty for smooth loops).
    pub fn loop_corners(&self, _l: usize) -> Vec<f64> {
        match &self.kind {
            DomainKind::Polygon { vertices } => {
                let n = vertices.len();
                let mut s = 0.0;
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    out.push(s / self.perimeter * TAU);
                    s += dist(vertices[i], vertices[(i + 1) % n]);
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Point inside the hole bounded by inner loop `l >= 1`.
    pub fn hole_anchor(&self, l: usize) -> Option<Point> {
        match self.kind {
            DomainKind::Annulus { .. } if l == 1 => Some([0.0, 0.0]),
            _ => None,
        }
    }

    /// Center and radius of a disk containing the domain.
    pub fn bounding_circle(&self) -> (Point, f64) {
        match &self.kind {
            DomainKind::UnitDisk | DomainKind::Annulus { .. } => ([0.0, 0.0], 1.0),
            DomainKind::Polygon { vertices } => {
                let n = vertices.len() as f64;
                let c = [
                    vertices.iter().map(|v| v[0]).sum::<f64>() / n,
                    vertices.iter().map(|v| v[1]).sum::<f64>() / n,
                ];
                let r = vertices.iter().map(|v| dist(*v, c)).fold(0.0, f64::max);
                (c, r)
            }
        }
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

pub(crate) fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let f = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + f * ab[0], a[1] + f * ab[1]])
}

fn point_in_polygon(v: &[Point], p: Point) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}
