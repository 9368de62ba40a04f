use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::mesh::BoundaryEdge;
use super::{Domain, DomainKind, Mesh};
use crate::{dist, Error, Point, Result};

/// Mesh sizing: local size `min(h_far, max(h_near, grading * dist))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshOptions {
    pub h_far: f64,
    pub h_near: f64,
    pub grading: f64,
    pub min_angle_deg: f64,
    /// Mesh the half `x1 >= 0` and reflect it, giving a mesh invariant under `x1 -> -x1`.
    pub mirror: bool,
}

impl MeshOptions {
    pub fn new(h_far: f64) -> Self {
        Self { h_far, h_near: h_far / 20.0, grading: 0.3, min_angle_deg: 22.0, mirror: false }
    }

    pub fn with_h_near(mut self, h_near: f64) -> Self {
        self.h_near = h_near;
        self
    }

    pub fn mirrored(mut self, mirror: bool) -> Self {
        self.mirror = mirror;
        self
    }

    pub(crate) fn size_at(&self, p: Point, sources: &[Point]) -> f64 {
        let d = sources.iter().map(|x| dist(p, *x)).fold(f64::INFINITY, f64::min);
        self.h_far.min(self.h_near.max(self.grading * d))
    }
}

pub fn build_mesh(domain: &Domain, vortices: &[Point], h_far: f64, h_near: f64) -> Result<Mesh> {
    build_mesh_with(domain, vortices, &MeshOptions::new(h_far).with_h_near(h_near))
}

pub fn build_mesh_with(domain: &Domain, vortices: &[Point], opts: &MeshOptions) -> Result<Mesh> {
    if !(opts.h_near > 0.0 && opts.h_near <= opts.h_far && opts.h_far.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "mesh sizes must satisfy 0 < h_near <= h_far (got {} and {})",
            opts.h_near, opts.h_far
        )));
    }
    if !(opts.grading > 0.0) {
        return Err(Error::InvalidConfig("grading factor must be positive".into()));
    }
    for (i, x) in vortices.iter().enumerate() {
        if !domain.contains(*x) || domain.distance_to_boundary(*x) < 1e-9 {
            return Err(Error::InvalidConfig(format!("vortex {i} at ({}, {}) is not inside the domain", x[0], x[1])));
        }
        for (j, y) in vortices.iter().enumerate().skip(i + 1) {
            if dist(*x, *y) < 1e-12 {
                return Err(Error::InvalidConfig(format!("vortices {i} and {j} coincide")));
            }
        }
    }
    let mut sources = vortices.to_vec();
    if opts.mirror {
        if !domain.is_mirror_symmetric() {
            return Err(Error::InvalidConfig("mirrored mesh needs a domain symmetric in x1".into()));
        }
        if let Some(i) = vortices.iter().position(|x| x[0].abs() < 1e-9) {
            return Err(Error::InvalidConfig(format!("vortex {i} lies on the mirror axis")));
        }
        sources.extend(vortices.iter().map(|x| [-x[0], x[1]]));
    }
    let mut last = None;
    for attempt in 0..6 {
        let raw = if opts.mirror {
            mirror_raw(half_mesh(domain, &sources, opts, attempt)?)
        } else {
            full_mesh(domain, &sources, opts, attempt)?
        };
        match assemble(raw, domain, vortices, opts) {
            Ok(m) => return Ok(m),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::InvalidDomain("mesh generation failed".into())))
}

struct RawMesh {
    vertices: Vec<Point>,
    tags: Vec<Option<(usize, f64)>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<BoundaryEdge>,
}

/// Parameters in `[t0, t1]` spaced by the local size along `curve`.
fn discretize(curve: &dyn Fn(f64) -> Point, t0: f64, t1: f64, size: &dyn Fn(Point) -> f64) -> Vec<f64> {
    const FINE: usize = 4000;
    let dt = (t1 - t0) / FINE as f64;
    let mut cum = vec![0.0; FINE + 1];
    let mut prev = curve(t0);
    let mut prev_rho = 1.0 / size(prev);
    for k in 1..=FINE {
        let p = curve(t0 + k as f64 * dt);
        let rho = 1.0 / size(p);
        cum[k] = cum[k - 1] + 0.5 * (rho + prev_rho) * dist(p, prev);
        prev = p;
        prev_rho = rho;
    }
    let total = cum[FINE];
    let n = (total.round() as usize).max(2);
    let mut out = Vec::with_capacity(n + 1);
    out.push(t0);
    let mut k = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while cum[k + 1] < target {
            k += 1;
        }
        let f = (target - cum[k]) / (cum[k + 1] - cum[k]);
        out.push(t0 + (k as f64 + f) * dt);
    }
    out.push(t1);
    out
}

/// Closed boundary pieces: polylines with per-point tags and per-edge loop index.
struct Piece {
    points: Vec<(Point, Option<(usize, f64)>)>,
    /// Loop index and whether edge `k -> k+1` runs along `tau`.
    boundary: Option<(usize, bool)>,
}

fn circle_arc(radius: f64, l: usize, t0: f64, t1: f64, size: &dyn Fn(Point) -> f64) -> Vec<(Point, Option<(usize, f64)>)> {
    let curve = move |t: f64| [radius * t.cos(), radius * t.sin()];
    discretize(&curve, t0, t1, size)
        .into_iter()
        .map(|t| {
            let mut p = curve(t);
            if (t - FRAC_PI_2).abs() < 1e-14 || (t + FRAC_PI_2).abs() < 1e-14 {
                p[0] = 0.0;
            }
            (p, Some((l, t.rem_euclid(TAU))))
        })
        .collect()
}

fn segment(a: Point, b: Point, size: &dyn Fn(Point) -> f64) -> Vec<(Point, Option<(usize, f64)>)> {
    let curve = move |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let mut pts: Vec<_> = discretize(&curve, 0.0, 1.0, size).into_iter().map(|s| (curve(s), None)).collect();
    pts.last_mut().unwrap().0 = b;
    pts
}

fn full_mesh(domain: &Domain, sources: &[Point], opts: &MeshOptions, attempt: usize) -> Result<RawMesh> {
    let size = |p: Point| opts.size_at(p, sources);
    let mut pieces = Vec::new();
    match domain.kind() {
        DomainKind::UnitDisk | DomainKind::Annulus { .. } => {
            for l in 0..domain.n_components() {
                let r = if l == 0 { 1.0 } else { domain.inner_radius().unwrap_or(1.0) };
                let mut pts = circle_arc(r, l, 0.0, TAU, &size);
                pts.pop();
                pts.push(pts[0]);
                pieces.push(Piece { points: pts, boundary: Some((l, l == 0)) });
            }
        }
        DomainKind::Polygon { vertices } => {
            let n = vertices.len();
            let mut pts = Vec::new();
            for i in 0..n {
                let seg = segment(vertices[i], vertices[(i + 1) % n], &size);
                let skip_last = seg.len() - 1;
                for (p, _) in seg.into_iter().take(skip_last) {
                    pts.push((p, Some((0, domain.loop_parameter(0, p)))));
                }
            }
            pts.push(pts[0]);
            pieces.push(Piece { points: pts, boundary: Some((0, true)) });
        }
    }
    let keep = |p: Point| domain.contains(p) && domain.distance_to_boundary(p) > 0.6 * size(p);
    triangulate(pieces, interior_points(domain, sources, opts, attempt, &keep), opts)
}

fn half_mesh(domain: &Domain, sources: &[Point], opts: &MeshOptions, attempt: usize) -> Result<RawMesh> {
    let size = |p: Point| opts.size_at(p, sources);
    let mut pieces = Vec::new();
    let outer = circle_arc(1.0, 0, -FRAC_PI_2, FRAC_PI_2, &size);
    pieces.push(Piece { points: outer, boundary: Some((0, true)) });
    match domain.inner_radius() {
        None => {
            let mut axis = segment([0.0, 1.0], [0.0, -1.0], &size);
            axis.first_mut().unwrap().1 = Some((0, FRAC_PI_2));
            axis.last_mut().unwrap().1 = Some((0, 3.0 * FRAC_PI_2));
            pieces.push(Piece { points: axis, boundary: None });
        }
        Some(r) => {
            let mut top = segment([0.0, 1.0], [0.0, r], &size);
            top.first_mut().unwrap().1 = Some((0, FRAC_PI_2));
            top.last_mut().unwrap().1 = Some((1, FRAC_PI_2));
            pieces.push(Piece { points: top, boundary: None });
            // inner arc traversed clockwise, which is tau on an inner loop
            let mut inner = circle_arc(r, 1, -FRAC_PI_2, FRAC_PI_2, &size);
            inner.reverse();
            pieces.push(Piece { points: inner, boundary: Some((1, true)) });
            let mut bottom = segment([0.0, -r], [0.0, -1.0], &size);
            bottom.first_mut().unwrap().1 = Some((1, 3.0 * FRAC_PI_2));
            bottom.last_mut().unwrap().1 = Some((0, 3.0 * FRAC_PI_2));
            pieces.push(Piece { points: bottom, boundary: None });
        }
    }
    let keep = |p: Point| {
        let s = size(p);
        p[0] > 0.6 * s && domain.contains(p) && domain.distance_to_boundary(p) > 0.6 * s
    };
    triangulate(pieces, interior_points(domain, sources, opts, attempt, &keep), opts)
}

fn interior_points(
    domain: &Domain,
    sources: &[Point],
    opts: &MeshOptions,
    attempt: usize,
    keep: &dyn Fn(Point) -> bool,
) -> Vec<Point> {
    let (c, r) = domain.bounding_circle();
    let half = 1.1 * r;
    // irrational offsets keep vortices off the quadtree lattice
    let shift = [
        half * (0.0123456789 + 0.0311 * attempt as f64) * 2f64.sqrt(),
        half * (0.0217391 + 0.0173 * attempt as f64) * 3f64.sqrt(),
    ];
    let mut out = Vec::new();
    let mut stack = vec![([c[0] + shift[0], c[1] + shift[1]], half, 0usize)];
    while let Some((center, h, depth)) = stack.pop() {
        let reach = h * 2f64.sqrt();
        if domain.distance_to_boundary(center) > reach && !domain.contains(center) {
            continue;
        }
        let d = sources.iter().map(|x| dist(center, *x)).fold(f64::INFINITY, f64::min);
        let s_min = opts.h_far.min(opts.h_near.max(opts.grading * (d - reach).max(0.0)));
        if 2.0 * h > s_min && depth < 24 {
            let q = 0.5 * h;
            for (dx, dy) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
                stack.push(([center[0] + dx, center[1] + dy], q, depth + 1));
            }
        } else if keep(center) {
            let s = opts.size_at(center, sources);
            if sources.iter().all(|x| dist(center, *x) > 0.3 * s) {
                out.push(center);
            }
        }
    }
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out
}

fn triangulate(pieces: Vec<Piece>, interior: Vec<Point>, opts: &MeshOptions) -> Result<RawMesh> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut tags: HashMap<usize, (usize, f64)> = HashMap::new();
    let mut handle_of: HashMap<(u64, u64), FixedVertexHandle> = HashMap::new();
    let mut insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point| -> Result<FixedVertexHandle> {
        let key = (p[0].to_bits(), p[1].to_bits());
        if let Some(h) = handle_of.get(&key) {
            return Ok(*h);
        }
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::InvalidDomain(format!("triangulation insert failed: {e:?}")))?;
        handle_of.insert(key, h);
        Ok(h)
    };
    let mut boundary_pairs = Vec::new();
    for piece in &pieces {
        let mut handles = Vec::with_capacity(piece.points.len());
        for (p, tag) in &piece.points {
            let h = insert(&mut cdt, *p)?;
            if let Some(tag) = tag {
                tags.insert(h.index(), *tag);
            }
            handles.push(h);
        }
        for w in handles.windows(2) {
            if w[0] != w[1] {
                cdt.add_constraint(w[0], w[1]);
                if let Some((l, along)) = piece.boundary {
                    let (a, b) = if along { (w[0], w[1]) } else { (w[1], w[0]) };
                    boundary_pairs.push((a.index(), b.index(), l));
                }
            }
        }
    }
    for p in interior {
        insert(&mut cdt, p)?;
    }
    let n_before = cdt.num_vertices();
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(opts.min_angle_deg))
            .exclude_outer_faces(true)
            .keep_constraint_edges()
            .with_max_additional_vertices(20 * n_before + 1000),
    );
    let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vtags = Vec::new();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let idx = v.fix().index();
            let next = vertices.len();
            let id = *remap.entry(idx).or_insert_with(|| {
                let p = v.position();
                vertices.push([p.x, p.y]);
                vtags.push(tags.get(&idx).copied());
                next
            });
            tri[k] = id;
        }
        triangles.push(tri);
    }
    let edges = boundary_pairs
        .into_iter()
        .map(|(a, b, component)| {
            let a = *remap.get(&a).ok_or_else(|| Error::InvalidDomain("boundary vertex lost".into()))?;
            let b = *remap.get(&b).ok_or_else(|| Error::InvalidDomain("boundary vertex lost".into()))?;
            Ok(BoundaryEdge { a, b, component })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawMesh { vertices, tags: vtags, triangles, edges })
}

fn mirror_raw(half: RawMesh) -> RawMesh {
    let RawMesh { mut vertices, mut tags, triangles, edges } = half;
    let n = vertices.len();
    let mut image = vec![0usize; n];
    for i in 0..n {
        let p = vertices[i];
        if p[0] == 0.0 {
            image[i] = i;
        } else {
            image[i] = vertices.len();
            vertices.push([-p[0], p[1]]);
            tags.push(tags[i].map(|(l, t)| (l, (PI - t).rem_euclid(TAU))));
        }
    }
    let mut all_tris = triangles.clone();
    all_tris.extend(triangles.iter().map(|t| [image[t[0]], image[t[2]], image[t[1]]]));
    let mut all_edges = edges.clone();
    all_edges.extend(edges.iter().map(|e| BoundaryEdge { a: image[e.b], b: image[e.a], component: e.component }));
    RawMesh { vertices, tags, triangles: all_tris, edges: all_edges }
}

fn assemble(raw: RawMesh, domain: &Domain, vortices: &[Point], opts: &MeshOptions) -> Result<Mesh> {
    let RawMesh { vertices, tags, mut triangles, edges } = raw;
    for t in triangles.iter_mut() {
        let [a, b, c] = t.map(|v| vertices[v]);
        if crate::cross(crate::sub(b, a), crate::sub(c, a)) < 0.0 {
            t.swap(1, 2);
        }
    }
    let grading = vertices
        .iter()
        .map(|p| vortices.iter().map(|x| dist(*p, *x)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut boundary_param = tags;
    for e in &edges {
        for v in [e.a, e.b] {
            if boundary_param[v].is_none() {
                boundary_param[v] = Some((e.component, domain.loop_parameter(e.component, vertices[v])));
            }
        }
    }
    let mesh = Mesh::new(vertices, triangles, edges, boundary_param, grading, opts.h_far, opts.h_near)?;
    for (i, x) in vortices.iter().enumerate() {
        let (t, l) = mesh
            .locate(*x)
            .ok_or_else(|| Error::InvalidConfig(format!("vortex {i} not covered by the mesh")))?;
        let margin = l[0].min(l[1]).min(l[2]);
        if margin < 1e-6 {
            return Err(Error::InvalidDomain(format!("vortex {i} lies on an edge of triangle {t}")));
        }
    }
    Ok(mesh)
}
