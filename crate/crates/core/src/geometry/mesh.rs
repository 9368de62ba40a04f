use std::collections::HashMap;
use std::fmt::Write as _;

use super::Domain;
use crate::{cross, dist, sub, Error, Point, Result};

/// Boundary edge oriented along `tau`, so the domain lies to its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub component: usize,
}

/// Conforming, positively oriented P1 triangulation.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Loop index and loop parameter of each boundary vertex.
    pub boundary_param: Vec<Option<(usize, f64)>>,
    /// Distance to the nearest vortex used when grading (infinite without vortices).
    pub grading_radius: Vec<f64>,
    pub h_far: f64,
    pub h_near: f64,
    areas: Vec<f64>,
    grads: Vec<[Point; 3]>,
    loops: Vec<Vec<usize>>,
    locator: Locator,
}

impl Mesh {
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        boundary_param: Vec<Option<(usize, f64)>>,
        grading_radius: Vec<f64>,
        h_far: f64,
        h_near: f64,
    ) -> Result<Self> {
        let nv = vertices.len();
        if boundary_param.len() != nv || grading_radius.len() != nv {
            return Err(Error::InvalidDomain("per-vertex arrays have wrong length".into()));
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidDomain(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let det = cross(sub(b, a), sub(c, a));
            if det <= 0.0 {
                return Err(Error::InvalidDomain(format!("triangle {t} is not positively oriented")));
            }
            areas.push(0.5 * det);
            // gradient of barycentric coordinate i is perp of opposite edge over 2|T|
            let g = |p: Point, q: Point| [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
            grads.push([g(b, c), g(c, a), g(a, b)]);
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
        if edge_count.values().any(|&c| c > 2) {
            return Err(Error::InvalidDomain("edge shared by more than two triangles".into()));
        }
        let n_loops = boundary_edges.iter().map(|e| e.component + 1).max().unwrap_or(0);
        let mut loops = Vec::with_capacity(n_loops);
        for l in 0..n_loops {
            loops.push(chain_loop(&boundary_edges, l)?);
        }
        let locator = Locator::new(&vertices, &triangles);
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            boundary_param,
            grading_radius,
            h_far,
            h_near,
            areas,
            grads,
            loops,
            locator,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> &[Point; 3] {
        &self.grads[t]
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_param[v].is_some()
    }

    /// Boundary vertices of loop `l` in `tau` order (closed implicitly).
    pub fn boundary_loop(&self, l: usize) -> &[usize] {
        &self.loops[l]
    }

    pub fn n_boundary_loops(&self) -> usize {
        self.loops.len()
    }

    pub fn n_edges(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                seen.insert((i.min(j), i.max(j)));
            }
        }
        seen.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    pub fn boundary_tags(&self) -> Vec<usize> {
        let mut tags: Vec<usize> = self.boundary_edges.iter().map(|e| e.component).collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        (0..self.n_triangles()).map(|t| triangle_min_angle(self.corners(t))).fold(180.0, f64::min)
    }

    pub fn min_edge_length_near(&self, center: Point, radius: f64) -> f64 {
        let mut m = f64::INFINITY;
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                if dist(a, center) <= radius || dist(b, center) <= radius {
                    m = m.min(dist(a, b));
                }
            }
        }
        m
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        let det = 2.0 * self.areas[t];
        let l0 = cross(sub(b, p), sub(c, p)) / det;
        let l1 = cross(sub(c, p), sub(a, p)) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in self.locator.candidates(p) {
            let l = self.barycentric(t, p);
            let m = l[0].min(l[1]).min(l[2]);
            if best.as_ref().is_none_or(|b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        match best {
            Some((t, l, m)) if m >= -1e-10 => Some((t, l)),
            _ => None,
        }
    }

    /// All triangles incident to vertex `v`.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Triangles whose bounding box meets the disk `B(center, radius)`.
    pub fn triangles_near(&self, center: Point, radius: f64) -> Vec<usize> {
        self.locator.in_disk(&self.vertices, &self.triangles, center, radius)
    }

    /// ASCII dump: `V E T`, vertices, triangles, then tagged boundary edges.
    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.n_vertices(), self.boundary_edges.len(), self.n_triangles());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.component);
        }
        s
    }

    /// Parse the ASCII dump; boundary parameters are recomputed from `domain`.
    pub fn from_ascii(text: &str, domain: &Domain, vortices: &[Point]) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |m: &str| Error::Parse(format!("mesh file: {m}"));
        let head: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("empty"))?
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| bad("header")))
            .collect::<Result<_>>()?;
        if head.len() != 3 {
            return Err(bad("header needs V E T"));
        }
        let (nv, ne, nt) = (head[0], head[1], head[2]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = lines
                .next()
                .ok_or_else(|| bad("missing vertex"))?
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("vertex")))
                .collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(bad("vertex needs x y"));
            }
            vertices.push([v[0], v[1]]);
        }
        let mut parse_triple = |what: &str| -> Result<[usize; 3]> {
            let v: Vec<usize> = lines
                .next()
                .ok_or_else(|| bad(what))?
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad(what)))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(bad(what));
            }
            Ok([v[0], v[1], v[2]])
        };
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            triangles.push(parse_triple("triangle")?);
        }
        let mut edges = Vec::with_capacity(ne);
        for _ in 0..ne {
            let [a, b, component] = parse_triple("boundary edge")?;
            edges.push(BoundaryEdge { a, b, component });
        }
        let mut boundary_param = vec![None; nv];
        for e in &edges {
            for v in [e.a, e.b] {
                if v >= nv {
                    return Err(bad("edge vertex out of range"));
                }
                boundary_param[v] = Some((e.component, domain.loop_parameter(e.component, vertices[v])));
            }
        }
        let grading_radius = vertices
            .iter()
            .map(|p| vortices.iter().map(|x| dist(*p, *x)).fold(f64::INFINITY, f64::min))
            .collect();
        let mut h_far: f64 = 0.0;
        let mut h_near = f64::INFINITY;
        for t in &triangles {
            for k in 0..3 {
                let d = dist(vertices[t[k]], vertices[t[(k + 1) % 3]]);
                h_far = h_far.max(d);
                h_near = h_near.min(d);
            }
        }
        Mesh::new(vertices, triangles, edges, boundary_param, grading_radius, h_far, h_near)
    }
}

pub(crate) fn triangle_min_angle([a, b, c]: [Point; 3]) -> f64 {
    let ang = |p: Point, q: Point, r: Point| {
        let (u, v) = (sub(q, p), sub(r, p));
        cross(u, v).abs().atan2(u[0] * v[0] + u[1] * v[1]).to_degrees()
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

fn chain_loop(edges: &[BoundaryEdge], l: usize) -> Result<Vec<usize>> {
    let next: HashMap<usize, usize> =
        edges.iter().filter(|e| e.component == l).map(|e| (e.a, e.b)).collect();
    let Some(&start) = next.keys().min() else {
        return Ok(Vec::new());
    };
    let mut out = vec![start];
    let mut cur = next[&start];
    while cur != start {
        out.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::InvalidDomain(format!("boundary loop {l} is not closed")))?;
        if out.len() > next.len() {
            return Err(Error::InvalidDomain(format!("boundary loop {l} is not simple")));
        }
    }
    if out.len() != next.len() {
        return Err(Error::InvalidDomain(format!("boundary loop {l} has several pieces")));
    }
    Ok(out)
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Clone, Debug)]
struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(vertices: &[Point], triangles: &[[usize; 3]]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        if vertices.is_empty() {
            lo = [0.0; 2];
            hi = [1.0; 2];
        }
        let n = (triangles.len() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n).max(1e-12);
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut loc = Self { origin: lo, cell, nx, ny, buckets: Vec::new() };
        for (t, tri) in triangles.iter().enumerate() {
            let ps = tri.map(|v| vertices[v]);
            let (x0, y0) = loc.cell_of([ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)]);
            let (x1, y1) = loc.cell_of([ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)]);
            for i in x0..=x1 {
                for j in y0..=y1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        loc.buckets = buckets;
        loc
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = ((p[0] - self.origin[0]) / self.cell).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell).floor();
        let cx = fx.clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = fy.clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }

    fn candidates(&self, p: Point) -> &[usize] {
        let (i, j) = self.cell_of(p);
        &self.buckets[j * self.nx + i]
    }

    fn in_disk(&self, vertices: &[Point], triangles: &[[usize; 3]], c: Point, r: f64) -> Vec<usize> {
        let (x0, y0) = self.cell_of([c[0] - r, c[1] - r]);
        let (x1, y1) = self.cell_of([c[0] + r, c[1] + r]);
        let mut out = Vec::new();
        for i in x0..=x1 {
            for j in y0..=y1 {
                out.extend_from_slice(&self.buckets[j * self.nx + i]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&t| {
            let ps = triangles[t].map(|v| vertices[v]);
            let lo = [ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)];
            let hi = [ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)];
            let dx = (lo[0] - c[0]).max(0.0).max(c[0] - hi[0]);
            let dy = (lo[1] - c[1]).max(0.0).max(c[1] - hi[1]);
            dx * dx + dy * dy <= r * r
        });
        out
    }
}
