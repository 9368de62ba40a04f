use pharmlab::cli::disk_unit_degree_w;
use pharmlab::geometry::{BoundaryDatum, Domain, LoopPhase, MeshOptions};
use pharmlab::pharmonic::{minimize_phase, SolverParams};
use pharmlab::renorm::{grad_w_phase, renorm_energy_green, solve_linear_singular_problem};
use pharmlab::stationary::Problem;
use pharmlab::Point;
use proptest::prelude::*;

fn disk_problem(n: usize, h: f64) -> Problem {
    Problem {
        domain: Domain::unit_disk(),
        datum: BoundaryDatum::uniform(n as i64),
        degrees: vec![1; n],
        mesh: MeshOptions::new(h),
        solver: SolverParams::default(),
    }
}

fn separated(points: &[Point]) -> bool {
    points.iter().all(|p| p[0].hypot(p[1]) < 0.7)
        && points.iter().enumerate().all(|(i, p)| points[i + 1..].iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 0.3))
}

fn exact_gradient(points: &[Point]) -> Vec<f64> {
    let h = 1e-6;
    let mut out = Vec::new();
    for j in 0..points.len() {
        for k in 0..2 {
            let mut a = points.to_vec();
            let mut b = points.to_vec();
            a[j][k] += h;
            b[j][k] -= h;
            out.push((disk_unit_degree_w(&a) - disk_unit_degree_w(&b)) / (2.0 * h));
        }
    }
    out
}

fn annulus_theta(offset: f64) -> f64 {
    let pr = Problem {
        domain: Domain::annulus(0.3).unwrap(),
        datum: BoundaryDatum::new(vec![LoopPhase::pure(1), LoopPhase { offset, ..LoopPhase::pure(0) }]),
        degrees: vec![1],
        mesh: MeshOptions::new(0.1),
        solver: SolverParams::default(),
    };
    let map = pr.map_at(&[[0.6, 0.1]]).unwrap();
    renorm_energy_green(&solve_linear_singular_problem(&map).unwrap()).unwrap().breakdown.unwrap().theta
}

#[test]
fn annulus_flux_energy_is_quadratic_in_the_inner_offset() {
    let t: Vec<f64> = [2.5, 3.0, 3.5, 4.0].iter().map(|o| annulus_theta(*o)).collect();
    let second = t[2] - 2.0 * t[1] + t[0];
    let third = t[3] - 3.0 * t[2] + 3.0 * t[1] - t[0];
    assert!(second > 0.0);
    assert!(third.abs() < 1e-8 * t.iter().cloned().fold(0.0, f64::max), "{t:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn disk_energy_matches_closed_form(
        pts in prop::collection::vec((-0.65f64..0.65, -0.65f64..0.65), 1..3)
    ) {
        let points: Vec<Point> = pts.iter().map(|(x, y)| [*x, *y]).collect();
        prop_assume!(separated(&points));
        let pr = disk_problem(points.len(), 0.1);
        let map = pr.map_at(&points).unwrap();
        let w = renorm_energy_green(&solve_linear_singular_problem(&map).unwrap()).unwrap().value;
        let exact = disk_unit_degree_w(&points);
        prop_assert!((w - exact).abs() < 1e-2 * (1.0 + exact.abs()), "{} vs {}", w, exact);
        let g = grad_w_phase(&map).unwrap();
        let ge = exact_gradient(&points);
        let err = g.iter().zip(&ge).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = ge.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        prop_assert!(err < 2e-2 * scale, "{:?} vs {:?}", g, ge);
    }

    #[test]
    fn minimized_energy_never_exceeds_the_canonical_one(
        x in -0.5f64..0.5, y in -0.5f64..0.5, p in 1.6f64..1.99
    ) {
        let pr = disk_problem(1, 0.15);
        let map = pr.map_at(&[[x, y]]).unwrap();
        let s = minimize_phase(p, &map, &pr.solver).unwrap();
        prop_assert!(s.energy <= s.energy_zero * (1.0 + 1e-12));
        prop_assert!(s.residual < pr.solver.residual_tol);
    }
}
