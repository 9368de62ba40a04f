use std::fs;
use std::path::{Path, PathBuf};

use pharmlab::cli::{main_with_args, run, Command, ExperimentConfig, RunOptions, VortexSpec};
use pharmlab::geometry::{BoundaryDatum, DomainKind, LoopPhase};
use proptest::prelude::*;

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn exit(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["pharmlab".to_string(), cmd.into(), "--config".into(), config.display().to_string()];
    args.extend(["--out".to_string(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with_args(args)
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, cfg.to_json()).unwrap();
    p
}

fn single() -> ExperimentConfig {
    ExperimentConfig::from_json(&fs::read_to_string(shipped("disk_single_vortex.json")).unwrap()).unwrap()
}

#[test]
fn shipped_configs_parse_and_validate() {
    for name in ["disk_single_vortex.json", "disk_pair.json", "disk_dipole.json"] {
        let cfg = ExperimentConfig::from_json(&fs::read_to_string(shipped(name)).unwrap()).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn validate_passes_on_shipped_disk_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit("validate", &shipped("disk_single_vortex.json"), dir.path(), &[]), 0);
    let csv = fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(csv.starts_with("check,value,threshold,status\n"));
    assert!(!csv.contains(",fail"));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("failed = 0") && summary.contains("status = ok"));
}

#[test]
fn vortex_outside_domain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = single();
    cfg.datum = BoundaryDatum::uniform(2);
    cfg.vortices.push(VortexSpec { x: 0.9, y: 0.9, d: 1 });
    let path = write_config(dir.path(), &cfg);
    let opts = RunOptions { config: path.clone(), out: Some(dir.path().join("o")), ..Default::default() };
    let err = run(Command::Validate, &opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("vortex 1"), "{err}");
    assert_eq!(exit("renorm", &path, &dir.path().join("o"), &[]), 2);
}

#[test]
fn other_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(exit("mesh", &dir.path().join("missing.json"), &out, &[]), 2);
    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{ \"domain\": { \"kind\": \"unit-disk\" }, \"bogus\": 1 }").unwrap();
    assert_eq!(exit("mesh", &junk, &out, &[]), 2);
    let mut cfg = single();
    cfg.p_schedule = vec![1.9, 2.5];
    assert_eq!(exit("solve", &write_config(dir.path(), &cfg), &out, &[]), 2);
    let mut cfg = single();
    cfg.datum = BoundaryDatum::uniform(3);
    assert_eq!(exit("solve", &write_config(dir.path(), &cfg), &out, &[]), 2);
    let mut cfg = single();
    cfg.domain = DomainKind::Annulus { r_inner: 0.3 };
    assert_eq!(exit("mesh", &write_config(dir.path(), &cfg), &out, &[]), 2);
    assert_eq!(main_with_args(["pharmlab", "mesh"]), 2);
    assert_eq!(main_with_args(["pharmlab", "frobnicate"]), 2);
}

#[test]
fn renorm_breakdown_sums_to_w() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit("renorm", &shipped("disk_single_vortex.json"), dir.path(), &[]), 0);
    let text = fs::read_to_string(dir.path().join("energy.txt")).unwrap();
    let get = |k: &str| -> f64 {
        text.lines().find_map(|l| l.strip_prefix(&format!("{k} = "))).unwrap().parse().unwrap()
    };
    let sum = get("pairwise") + get("boundary") + get("self") + get("theta");
    assert!((sum - get("W")).abs() <= 1e-12 * (1.0 + get("W").abs()));
    let exact = pharmlab::cli::disk_unit_degree_w(&[[0.3, 0.2]]);
    assert!((get("W") - exact).abs() < 1e-2 * (1.0 + exact.abs()));
    for f in ["energy_rho.txt", "gradient.csv", "summary.txt", "config.resolved"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn every_output_directory_echoes_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    assert_eq!(exit("mesh", &shipped("disk_single_vortex.json"), &out, &["--seed", "7"]), 0);
    let echoed = ExperimentConfig::from_json(&fs::read_to_string(out.join("config.resolved")).unwrap()).unwrap();
    assert_eq!(echoed.seed, 7);
    assert_eq!(echoed.mesh.h_near, Some(echoed.mesh.h_far / 20.0));
    assert_eq!(echoed.output_dir, out.display().to_string());
    assert!(fs::read_to_string(out.join("mesh.txt")).unwrap().lines().count() > 10);
}

#[test]
fn solve_writes_iteration_logs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit("solve", &shipped("disk_single_vortex.json"), dir.path(), &[]), 0);
    for k in 0..3 {
        let log = fs::read_to_string(dir.path().join(format!("solve_{k}.csv"))).unwrap();
        assert!(log.starts_with("sweep,iter,eps,energy,residual\n"));
        assert!(log.lines().count() > 2);
    }
    let table = fs::read_to_string(dir.path().join("phases.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn stress_csv_has_one_row_per_vortex_delta_and_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = single();
    cfg.stress.deltas = vec![0.1, 0.15];
    assert_eq!(exit("stress", &write_config(dir.path(), &cfg), &dir.path().join("o"), &[]), 0);
    let csv = fs::read_to_string(dir.path().join("o/stress.csv")).unwrap();
    assert!(csv.starts_with("p,j,c1,c2,delta,err\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn dipole_fails_to_certify_with_solver_exit() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit("stationary", &shipped("disk_dipole.json"), dir.path(), &[]), 3);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("certified = false"));
    assert!(summary.contains("x_star = none"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(t);
        assert_eq!(exit("stress", &shipped("disk_single_vortex.json"), &out, &["--threads", t]), 0);
        runs.push((fs::read(out.join("stress.csv")).unwrap(), fs::read(out.join("summary.txt")).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
}

fn loop_phase() -> impl Strategy<Value = LoopPhase> {
    (-3i64..4, -10.0f64..10.0, prop::collection::vec(-1.0f64..1.0, 0..3), prop::collection::vec(-1e-3f64..1e-3, 0..3))
        .prop_map(|(winding, offset, cos, sin)| LoopPhase { winding, offset, cos, sin })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_losslessly(
        lp in loop_phase(),
        pts in prop::collection::vec((-0.7f64..0.7, -0.7f64..0.7, prop::sample::select(vec![-2i64, -1, 1, 3])), 1..4),
        h in 1e-3f64..0.5,
        schedule in prop::collection::vec(1.01f64..1.999, 1..4),
        seed in any::<u64>(),
        annulus in any::<bool>(),
    ) {
        let mut cfg = single();
        cfg.domain = if annulus { DomainKind::Annulus { r_inner: h } } else { DomainKind::UnitDisk };
        cfg.datum = BoundaryDatum::new(vec![lp]);
        cfg.vortices = pts.iter().map(|(x, y, d)| VortexSpec { x: *x, y: *y, d: *d }).collect();
        cfg.mesh.h_far = h;
        cfg.mesh.h_near = Some(h / 7.0);
        cfg.p_schedule = schedule;
        cfg.solver.eps_schedule = vec![h.sqrt(), h / 3.0];
        cfg.seed = seed;
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), cfg.to_json());
    }
}
