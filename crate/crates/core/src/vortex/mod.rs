//! Vortex configurations and the singular harmonic maps they determine.

mod canonical;
mod config;
mod current;

pub use canonical::{build_canonical_map, build_with_solver, loop_flux, transport_config, Anchor, CanonicalMap};
pub use config::{check_compatibility, singular_current, CompatibilityReport, VortexConfig};
pub use current::{circulation, CurrentField};

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::geometry::{build_mesh, winding_of_loop, BoundaryDatum, Domain, LoopPhase, Mesh};
    use crate::{dist, Error, Point};

    fn disk_map(points: Vec<Point>, degrees: Vec<i64>, g: BoundaryDatum, h: f64) -> CanonicalMap {
        let d = Domain::unit_disk();
        let c = VortexConfig::new(&d, points, degrees).unwrap();
        let mesh = Arc::new(build_mesh(&d, c.points(), h, h / 20.0).unwrap());
        build_canonical_map(&d, &g, &c, mesh).unwrap()
    }

    #[test]
    fn centered_vortex_is_radial() {
        let m = disk_map(vec![[0.0, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.1);
        assert!(m.phi.max_abs() < 1e-12);
        for p in [[0.3, 0.2], [-0.5, 0.1], [0.01, -0.02]] {
            let u = m.value_at(p).unwrap();
            let r = crate::norm(p);
            assert!((u - Complex64::new(p[0] / r, p[1] / r)).norm() < 1e-12);
        }
        let field = CurrentField::canonical(&m);
        let c = circulation(&field, [0.0, 0.0], 0.5, 256).unwrap();
        assert!((c - TAU).abs() < 1e-6);
    }

    #[test]
    fn off_center_winding() {
        let m = disk_map(vec![[0.3, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.1);
        let samples: Vec<Complex64> = (0..64)
            .map(|k| {
                let t = TAU * k as f64 / 64.0;
                m.value_at([0.3 + 0.05 * t.cos(), 0.05 * t.sin()]).unwrap()
            })
            .collect();
        assert_eq!(winding_of_loop(&samples).unwrap().value, 1);
        let field = CurrentField::canonical(&m);
        for r in [0.02, 0.05, 0.1, 0.2] {
            let c = circulation(&field, [0.3, 0.0], r, 256).unwrap();
            assert!((c / TAU - 1.0).abs() < 1e-3, "radius {r}: {c}");
        }
        let empty = circulation(&field, [-0.5, 0.2], 0.1, 256).unwrap();
        assert!(empty.abs() < 1e-3, "{empty}");
    }

    #[test]
    fn pair_trace_error() {
        let h = 0.1;
        let m = disk_map(vec![[0.4, 0.0], [-0.4, 0.0]], vec![1, 1], BoundaryDatum::uniform(2), h);
        let mesh = m.mesh().clone();
        let mut err: f64 = 0.0;
        for e in &mesh.boundary_edges {
            let (a, b) = (mesh.vertices[e.a], mesh.vertices[e.b]);
            for s in [0.0, 0.25, 0.5, 0.75] {
                let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let t = p[1].atan2(p[0]);
                err = err.max((m.value_at(p).unwrap() - Complex64::from_polar(1.0, 2.0 * t)).norm());
            }
        }
        assert!(err < 10.0 * h * h, "trace error {err}");
    }

    #[test]
    fn transport_properties() {
        let base = disk_map(vec![[0.0, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.1);
        let same = transport_config(&base, &[[0.0, 0.0]]).unwrap();
        assert_eq!(same.phi, base.phi);
        let ring: Vec<Point> = (0..40).map(|k| {
            let t = TAU * k as f64 / 40.0;
            [0.75 * t.cos(), 0.75 * t.sin()]
        }).collect();
        let diff = |a: &CanonicalMap, b: &CanonicalMap| {
            ring.iter()
                .map(|p| dist(a.current_at(*p).unwrap(), b.current_at(*p).unwrap()))
                .fold(0.0, f64::max)
        };
        let m1 = transport_config(&base, &[[0.01, 0.0]]).unwrap();
        let m2 = transport_config(&base, &[[0.02, 0.0]]).unwrap();
        let (d1, d2) = (diff(&base, &m1), diff(&base, &m2));
        assert!(d1 > 0.0 && d1 < 0.1, "{d1}");
        assert!((d2 / d1 - 2.0).abs() < 0.1, "slope ratio {}", d2 / d1);
        let back = transport_config(&m2, &[[0.0, 0.0]]).unwrap();
        let rt = back.phi.values.iter().zip(&base.phi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(rt < 1e-8, "round trip {rt}");
        let two_step = transport_config(&m1, &[[0.02, 0.0]]).unwrap();
        let comp = two_step.phi.values.iter().zip(&m2.phi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(comp < 1e-8, "composition {comp}");
        assert!(matches!(transport_config(&base, &[[0.6, 0.0]]), Err(Error::TransportTooFar(_))));
    }

    #[test]
    fn annulus_gauge_and_windings() {
        let d = Domain::annulus(0.3).unwrap();
        let g = BoundaryDatum::new(vec![LoopPhase::pure(2), LoopPhase::pure(1)]);
        let c = VortexConfig::new(&d, vec![[0.6, 0.1]], vec![1]).unwrap();
        let mesh = Arc::new(build_mesh(&d, c.points(), 0.08, 0.004).unwrap());
        let m = build_canonical_map(&d, &g, &c, mesh.clone()).unwrap();
        assert_eq!(m.anchors.len(), 1);
        // the flux can only be shifted by multiples of 2 pi times the capacity
        let cap = 2.0 * PI / (1.0 / 0.3f64).ln();
        assert!(m.flux[0].abs() <= 0.5 * TAU * cap * 1.01, "flux {}", m.flux[0]);
        let around = |r: f64| {
            let s: Vec<Complex64> = (0..200)
                .map(|k| {
                    let t = TAU * k as f64 / 200.0;
                    m.value_at([r * t.cos(), r * t.sin()]).unwrap()
                })
                .collect();
            winding_of_loop(&s).unwrap().value
        };
        assert_eq!(around(0.35), 1);
        assert_eq!(around(0.9), 2);
        let field = CurrentField::canonical(&m);
        let circ = circulation(&field, [0.6, 0.1], 0.05, 256).unwrap();
        assert!((circ / TAU - 1.0).abs() < 1e-3);
        let moved = transport_config(&m, &[[0.6, 0.15]]).unwrap();
        assert_eq!(moved.gauge, m.gauge);
        assert!((moved.flux[0] - m.flux[0]).abs() < 0.5);
    }

    #[test]
    fn incompatible_and_bad_inputs() {
        let d = Domain::unit_disk();
        let c = VortexConfig::new(&d, vec![[0.1, 0.0]], vec![2]).unwrap();
        let mesh = Arc::new(build_mesh(&d, c.points(), 0.2, 0.02).unwrap());
        let e = build_canonical_map(&d, &BoundaryDatum::uniform(1), &c, mesh).unwrap_err();
        assert!(matches!(e, Error::IncompatibleDegrees { .. }));
        let m = disk_map(vec![[0.1, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.2);
        assert!(matches!(circulation(&CurrentField::canonical(&m), [0.0, 0.0], 0.1, 64), Err(Error::SingularPoint(..))));
    }

    #[test]
    fn vortex_free_current_is_discrete_gradient() {
        let d = Domain::unit_disk();
        let c = VortexConfig::new(&d, vec![], vec![]).unwrap();
        let g = BoundaryDatum::new(vec![LoopPhase { winding: 0, offset: 0.2, cos: vec![0.3], sin: vec![0.0, 0.1] }]);
        let mesh = Arc::new(build_mesh(&d, &[], 0.1, 0.1).unwrap());
        let m = build_canonical_map(&d, &g, &c, mesh.clone()).unwrap();
        for t in (0..mesh.n_triangles()).step_by(17) {
            let p = mesh.corners(t)[0];
            assert_eq!(m.current_in(t, p), m.phi.gradient(&mesh, t));
        }
    }

    #[test]
    fn current_additivity() {
        let d = Domain::unit_disk();
        let mesh: Arc<Mesh> = Arc::new(build_mesh(&d, &[[0.3, 0.1], [-0.2, -0.3]], 0.1, 0.005).unwrap());
        let build = |pts: Vec<Point>, deg: Vec<i64>, w: i64| {
            let c = VortexConfig::new(&d, pts, deg).unwrap();
            build_canonical_map(&d, &BoundaryDatum::uniform(w), &c, mesh.clone()).unwrap()
        };
        let a = build(vec![[0.3, 0.1]], vec![1], 1);
        let b = build(vec![[-0.2, -0.3]], vec![-1], -1);
        let ab = build(vec![[0.3, 0.1], [-0.2, -0.3]], vec![1, -1], 0);
        for p in [[0.0, 0.0], [0.5, -0.5], [-0.6, 0.2]] {
            let (ja, jb, jab) = (a.current_at(p).unwrap(), b.current_at(p).unwrap(), ab.current_at(p).unwrap());
            assert!((ja[0] + jb[0] - jab[0]).abs() < 1e-9 && (ja[1] + jb[1] - jab[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn weak_divergence_residual() {
        let m = disk_map(vec![[0.3, 0.0]], vec![1], BoundaryDatum::uniform(1), 0.1);
        let mesh = m.mesh().clone();
        let vt = mesh.vertex_triangles();
        let mut worst: f64 = 0.0;
        for v in 0..mesh.n_vertices() {
            if mesh.is_boundary(v) || dist(mesh.vertices[v], [0.3, 0.0]) < 0.2 {
                continue;
            }
            let mut r = 0.0;
            for &t in &vt[v] {
                let k = mesh.triangles[t].iter().position(|w| *w == v).unwrap();
                let g = mesh.basis_gradients(t)[k];
                for n in crate::quadrature::triangle_rule(&mesh.corners(t)) {
                    r += n.weight * crate::dot(m.current_in(t, n.point), g);
                }
            }
            worst = worst.max(r.abs());
        }
        assert!(worst < 1e-5, "weak divergence residual {worst}");
    }
}
