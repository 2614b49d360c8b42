use std::fs;
use std::path::Path;

use rsl_core::lab::*;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn flow_config(experiment: &str, amplitude: f64) -> ExperimentConfig {
    config(&format!(
        r#"
experiment = "{experiment}"

[grid]
dim = 2
points = 12

[perturbation]
seed = 3
amplitude = {amplitude:e}

[flow]
t_end = 1.0
record_every = 5
reference_update_period = 0.5
"#
    ))
}

fn csv(dir: &Path) -> Vec<u8> {
    fs::read(dir.join("trace.csv")).unwrap()
}

#[test]
fn unknown_keys_are_rejected() {
    let base = "experiment = \"flow\"\n[grid]\ndim = 2\npoints = 8\n";
    assert!(ExperimentConfig::from_toml(base).is_ok());
    for bad in [
        format!("{base}colour = 1\n"),
        "experiment = \"flow\"\n[grid]\ndim = 2\npoints = 8\nsides = 3.0\n".to_string(),
        format!("{base}[flow]\ntend = 2.0\n"),
        format!("{base}[tolerances]\nlambda = 1.0\n"),
        "experiment = \"flows\"\n[grid]\ndim = 2\npoints = 8\n".to_string(),
    ] {
        match ExperimentConfig::from_toml(&bad) {
            Err(rsl_core::Error::Config(_)) => {}
            other => panic!("accepted {bad:?}: {other:?}"),
        }
    }
}

#[test]
fn invalid_grids_and_metrics_are_config_errors() {
    for bad in [
        "experiment = \"curvature\"\n[grid]\ndim = 4\npoints = 8\n",
        "experiment = \"curvature\"\n[grid]\ndim = 2\npoints = 8\nstencil = 3\n",
        "experiment = \"curvature\"\n[grid]\ndim = 2\npoints = 8\nmetric = [[1.0, 2.0], [2.0, 1.0]]\n",
        "experiment = \"curvature\"\n[grid]\ndim = 2\npoints = 8\nmetric = [[1.0, 0.1], [0.0, 1.0]]\n",
    ] {
        assert!(matches!(ExperimentConfig::from_toml(bad), Err(rsl_core::Error::Config(_))), "{bad}");
    }
}

#[test]
fn seeds_must_fit_a_toml_integer() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = flow_config("flow", 1e-3);
    cfg.perturbation.seed = u64::MAX;
    assert!(matches!(cfg.validate(), Err(rsl_core::Error::Config(_))));
    assert!(matches!(run_experiment(&cfg, dir.path(), 1), Err(rsl_core::Error::Config(_))));
    cfg.perturbation.seed = i64::MAX as u64;
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back.perturbation.seed, i64::MAX as u64);
}

#[test]
fn config_echo_round_trips() {
    let mut cfg = flow_config("flow", 1e-3);
    cfg.sweep = Some(SweepConfig { seeds: vec![1, 2] });
    cfg.grid.metric = Some(vec![vec![1.5, 0.1], vec![0.1, 0.75]]);
    cfg.perturbation.shift = Some(vec![0.01, 0.0, -0.02]);
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn flow_run_is_byte_reproducible_and_echo_reruns_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flow_config("flow", 1e-3);
    let a = run_experiment(&cfg, &dir.path().join("a"), 1).unwrap();
    assert_eq!(a.status, Status::Passed, "{:?}", a.failures());
    run_experiment(&cfg, &dir.path().join("b"), 1).unwrap();
    assert_eq!(csv(&dir.path().join("a")), csv(&dir.path().join("b")));

    let echoed = ExperimentConfig::load(&dir.path().join("a").join("config.toml")).unwrap();
    run_experiment(&echoed, &dir.path().join("c"), 1).unwrap();
    assert_eq!(csv(&dir.path().join("a")), csv(&dir.path().join("c")));
    for f in ["summary.json", "result.json", "reference_0.rsl", "reference_1.rsl"] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
}

#[test]
fn sweep_points_are_isolated_and_parallel_runs_match() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = flow_config("flow", 1e-3);
    cfg.sweep = Some(SweepConfig { seeds: vec![4, 5, 6] });
    let seq = run_experiment(&cfg, &dir.path().join("seq"), 1).unwrap();
    let par = run_experiment(&cfg, &dir.path().join("par"), 3).unwrap();
    assert_eq!(seq.points.len(), 3);
    assert_eq!(par.status, Status::Passed);
    for s in [4, 5, 6] {
        let sub = format!("seed_{s}");
        assert_eq!(csv(&dir.path().join("seq").join(&sub)), csv(&dir.path().join("par").join(&sub)));
    }
    assert_ne!(csv(&dir.path().join("seq/seed_4")), csv(&dir.path().join("seq/seed_5")));
}

#[test]
fn monotonicity_without_perturbation_has_constant_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = flow_config("monotonicity", 0.0);
    let out = run_experiment(&cfg, dir.path(), 1).unwrap();
    assert_eq!(out.code(), 0, "{:?}", out.failures());
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lambdas: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert!(lambdas.len() > 2);
    assert!(lambdas.iter().all(|l| *l == lambdas[0]));
}

#[test]
fn monotonicity_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = flow_config("monotonicity", 1e-2);
    cfg.sweep = Some(SweepConfig { seeds: vec![1, 2] });
    let out = run_experiment(&cfg, dir.path(), 2).unwrap();
    assert_eq!(out.code(), 0, "{:?}", out.failures());
}

#[test]
fn oversized_flow_reports_leaving_the_neighbourhood() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = flow_config("flow", 0.9);
    cfg.perturbation.seed = 1;
    cfg.perturbation.max_wavenumber = 3;
    cfg.flow.kind = rsl_core::flows::FlowKind::Ricci;
    cfg.flow.t_end = 5.0;
    let out = run_experiment(&cfg, dir.path(), 1).unwrap();
    assert_eq!(out.status, Status::AssertionFailed);
    assert!(out.failures()[0].contains("left neighbourhood at t = "), "{:?}", out.failures());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"]["status"], "left_neighbourhood");
    assert!(summary["termination"]["time"].as_f64().unwrap() < 5.0);
}

#[test]
fn stability_on_flat_torus_is_linearly_stable_with_unit_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("experiment = \"stability\"\n[grid]\ndim = 2\npoints = 32\nstencil = 6\n");
    let out = run_experiment(&cfg, dir.path(), 1).unwrap();
    assert_eq!(out.code(), 0);
    let s = &out.points[0].summary;
    assert_eq!(s["verdict"], "LinearlyStable");
    let eig_tol = s["eig_tol"].as_f64().unwrap();
    assert!((s["gap_two_delta"].as_f64().unwrap() - 1.0).abs() <= eig_tol);
    assert_eq!(s["kernel_dim"], 3);
}

#[test]
fn unconverged_spectrum_exits_with_solver_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "experiment = \"spectrum\"\n[grid]\ndim = 2\npoints = 16\n[spectrum]\nk = 8\nblock = 2\nmax_basis = 12\nmax_restarts = 1\n",
    );
    let out = run_experiment(&cfg, dir.path(), 1).unwrap();
    assert_eq!(out.status, Status::NotConverged);
    assert_eq!(out.code(), 2);
}

#[test]
fn single_shot_experiments_pass_on_small_perturbations() {
    for exp in ["curvature", "lambda", "decompose", "secondvar"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&format!(
            "experiment = \"{exp}\"\n[grid]\ndim = 2\npoints = 12\n[perturbation]\nseed = 9\namplitude = 1e-3\n"
        ));
        let out = run_experiment(&cfg, dir.path(), 1).unwrap();
        assert_eq!(out.code(), 0, "{exp}: {:?}", out.failures());
        assert!(dir.path().join("summary.json").is_file());
    }
}

#[test]
fn flat_curvature_lambda_and_spectrum_assertions() {
    for exp in ["curvature", "lambda", "spectrum"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&format!(
            "experiment = \"{exp}\"\n[grid]\ndim = 2\npoints = 8\nmetric = [[2.0, 0.3], [0.3, 0.5]]\n"
        ));
        let out = run_experiment(&cfg, dir.path(), 1).unwrap();
        assert_eq!(out.code(), 0, "{exp}");
    }
}

#[test]
fn compare_against_itself_and_half_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let mut full = flow_config("flow", 1e-3);
    full.flow.t_end = 2.0;
    let mut half = full.clone();
    half.perturbation.amplitude = 5e-4;
    run_experiment(&full, &dir.path().join("full"), 1).unwrap();
    run_experiment(&half, &dir.path().join("half"), 1).unwrap();

    let same = compare_runs(&dir.path().join("full"), &dir.path().join("full")).unwrap();
    assert_eq!(same.max_rel, 0.0);
    let lin = compare_runs(&dir.path().join("full"), &dir.path().join("half")).unwrap();
    let sup = lin.column("sup_dist").unwrap();
    assert!((sup.min_ratio.unwrap() - 2.0).abs() <= 0.2 && (sup.max_ratio.unwrap() - 2.0).abs() <= 0.2, "{sup:?}");
}

#[test]
fn compare_rejects_incompatible_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = flow_config("flow", 1e-3);
    let mut b = a.clone();
    b.grid.points = 16;
    run_experiment(&a, &dir.path().join("a"), 1).unwrap();
    run_experiment(&b, &dir.path().join("b"), 1).unwrap();
    assert!(compare_runs(&dir.path().join("a"), &dir.path().join("b")).is_err());
    assert!(compare_runs(&dir.path().join("a"), &dir.path().join("missing")).is_err());
}

#[test]
fn gauge_transfer_experiment_and_lambda_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
experiment = "gauge-transfer"

[grid]
dim = 2
points = 24
stencil = 6

[perturbation]
seed = 5
amplitude = 1e-2

[flow]
t_end = 2.0
record_every = 4

[tolerances]
transfer_rel = 1e-3
"#,
    );
    let out = run_experiment(&cfg, dir.path(), 1).unwrap();
    assert_eq!(out.code(), 0, "{:?}", out.failures());
    let report = compare_runs(&dir.path().join("deturck"), &dir.path().join("ricci")).unwrap();
    assert!(report.column("lambda").unwrap().max_rel < 1e-3);
    assert!(report.column("vol").unwrap().max_rel < 1e-8);
}

#[test]
fn automatic_update_period_uses_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = flow_config("flow", 1e-3);
    cfg.flow.reference_update_period = None;
    cfg.flow.auto_reference_update = true;
    cfg.flow.t_end = 2.5;
    let out = run_experiment(&cfg, dir.path(), 1).unwrap();
    assert_eq!(out.code(), 0, "{:?}", out.failures());
    let period = out.points[0].summary["config"]["reference_update_period"].as_f64().unwrap();
    assert!((period - 2.0).abs() < 0.1, "{period}");
}
