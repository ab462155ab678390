use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evi_plast_cli::config::{parse_scenario, ConfigError, InitialPreset, OutputFormat};
use evi_plast_cli::export::{read_time_series, write_time_series};
use evi_plast_cli::Scenario;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evi-plast")).args(args).output().unwrap()
}

fn run_scenario(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn invalid_message(text: &str) -> String {
    match parse_scenario(text) {
        Err(ConfigError::Invalid(m)) => m,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn minimal_scenario_fills_defaults() {
    let cfg = parse_scenario("").unwrap();
    assert_eq!(cfg.mesh.resolution, vec![4, 4]);
    assert_eq!(cfg.regularization.smoothing, 0.05);
    assert_eq!(cfg.initial.preset, InitialPreset::Rest);
    assert_eq!(cfg.output.format, OutputFormat::Csv);
    assert!(Scenario::build(cfg).is_ok());
}

#[test]
fn validation_names_the_violated_assumption() {
    assert!(invalid_message("[regularization]\nsmoothing = 1.2").contains("s in (0, 1)"));
    assert!(invalid_message("[mesh]\ndirichlet = []").contains("positive boundary measure"));
    assert!(invalid_message("[objective]\nalpha = 0.0").contains("Tikhonov"));
    assert!(invalid_message("[mesh]\ndirichlet = [\"front\"]").contains("front"));
    assert!(matches!(parse_scenario("[mesh]\nbogus = 1"), Err(ConfigError::Parse(_))));
}

#[test]
fn shipped_scenarios_load() {
    for name in ["default.toml", "elastic.toml", "equilibrium.toml"] {
        let cfg = evi_plast_cli::load_scenario(&scenario_path(name)).unwrap();
        Scenario::build(cfg).unwrap();
    }
}

#[test]
fn build_checks_initial_admissibility() {
    let cfg = parse_scenario("[control]\nspace = \"h1_l2\"\ninitial = \"sine_pulse\"").unwrap();
    assert!(Scenario::build(cfg).is_ok());
    let mut cfg = parse_scenario("").unwrap();
    cfg.initial.preset = InitialPreset::PlasticSeed;
    cfg.initial.seed_strain = vec![0.5, 0.0, 0.0];
    // initial stress far outside the admissible set
    assert!(Scenario::build(cfg).is_err());
}

#[test]
fn forward_on_equilibrium_is_constant_and_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario("forward", &scenario_path("equilibrium.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_time_series(&dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert_eq!(r.energy, rows[0].energy);
        assert_eq!(r.norm_u, rows[0].norm_u);
        assert_eq!(r.norm_q, rows[0].norm_q);
        assert_eq!(r.norm_v, 0.0);
    }
    let snapshots = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "vtk")).count();
    assert_eq!(snapshots, 3);
}

/// Recomputes `‖u‖` from a VTK snapshot and compares with the CSV value.
#[test]
fn exported_norms_are_recomputable_from_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_path("default.toml");
    let out = run_scenario("forward", &path, dir.path(), &["--format", "both"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_time_series(&dir.path().join("timeseries.csv")).unwrap();
    let sc = Scenario::build(evi_plast_cli::load_scenario(&path).unwrap()).unwrap();
    let steps = sc.grid.steps;
    let text = std::fs::read_to_string(dir.path().join(format!("snapshot_{steps:04}.vtk"))).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| *l == "VECTORS u double").unwrap() + 1;
    let n_nodes = sc.ops.space.mesh.coords.len();
    let full: Vec<f64> = lines[start..start + n_nodes]
        .iter()
        .flat_map(|l| l.split_whitespace().take(2).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    let u = sc.ops.space.restrict(&full);
    let norm = sc.ops.mass_inner(&u, &u).sqrt();
    let expected = rows[steps].norm_u;
    assert!((norm - expected).abs() <= 1e-14 * expected, "{norm} vs {expected}");
}

#[test]
fn forward_with_eight_steps_has_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[time]\nsteps = 8\n");
    let out = run_scenario("forward", &config, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.starts_with("t,energy,norm_u,norm_v,norm_q,objective_integrand\n"));
}

#[test]
fn csv_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::build(parse_scenario("[time]\nsteps = 6").unwrap()).unwrap();
    let traj = sc.problem.state(&sc.load).unwrap();
    let rows = evi_plast_cli::export::time_series(&traj, &sc.target, &sc.ops);
    let path = dir.path().join("ts.csv");
    write_time_series(&path, &rows).unwrap();
    assert_eq!(read_time_series(&path).unwrap(), rows);
}

#[test]
fn gradcheck_on_default_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario("gradcheck", &scenario_path("default.toml"), dir.path(), &["--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let err: f64 = stdout.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-4, "{stdout}");
    let table = std::fs::read_to_string(dir.path().join("gradcheck.csv")).unwrap();
    assert_eq!(table.lines().count(), 11);
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = scenario_path("default.toml");
    for d in [&a, &b] {
        assert_eq!(run_scenario("gradcheck", &config, d.path(), &["--seed", "7"]).status.code(), Some(0));
        assert_eq!(run_scenario("forward", &config, d.path(), &[]).status.code(), Some(0));
    }
    for name in ["gradcheck.csv", "timeseries.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn optimize_and_continuation_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[mesh]\nresolution = [3, 3]\n[time]\nsteps = 8\n[optimizer]\nmax_iter = 5\n[regularization]\nschedule_lambdas = [0.2, 0.1]\n",
    );
    assert_eq!(run_scenario("optimize", &config, dir.path(), &[]).status.code(), Some(0));
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.lines().count() >= 2);
    let values: Vec<f64> = history.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(dir.path().join("control.csv").exists());
    assert!(dir.path().join("optimal_timeseries.csv").exists());

    assert_eq!(run_scenario("continuation", &config, dir.path(), &[]).status.code(), Some(0));
    let stages = std::fs::read_to_string(dir.path().join("continuation.csv")).unwrap();
    assert_eq!(stages.lines().count(), 3);
}

#[test]
fn lambda_study_writes_decreasing_distances() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario("lambda_study", &scenario_path("default.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("strictly decreasing: true"));
    assert_eq!(std::fs::read_to_string(dir.path().join("lambda_study.csv")).unwrap().lines().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let default = scenario_path("default.toml");
    assert_eq!(run(&["explode", "--config", default.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["forward"]).status.code(), Some(2));

    let bad = write_config(dir.path(), "[regularization]\nsmoothing = 1.2\n");
    let out = run_scenario("forward", &bad, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s in (0, 1)"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(run_scenario("forward", &missing, dir.path(), &[]).status.code(), Some(2));

    let failing = write_config(
        dir.path(),
        "[control]\namplitude = 5.0\n[regularization]\nlambda = 0.01\n[newton]\nmax_iter = 1\nabs_tol = 1e-16\nrel_tol = 0.0\n",
    );
    let out = run_scenario("forward", &failing, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
