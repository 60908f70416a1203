use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use impctl::cli::RunConfig;
use impctl::operator::TabulatedForcing;
use impctl::propagator::{Segment, Trajectory};
use tempfile::TempDir;

fn impctl(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_impctl"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run_ok(args: &[&str]) {
    let (code, err) = impctl(args);
    assert_eq!(code, 0, "{args:?}: {err}");
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn every_subcommand_writes_its_files() {
    let tmp = TempDir::new().unwrap();
    let expect: [(&str, &[&str]); 6] = [
        ("simulate", &["trajectory.csv", "summary.csv"]),
        (
            "gramian",
            &["W.csv", "gamma.csv", "gamma_tilde.csv", "theta.csv", "theta_tilde.csv", "eigenvalues.csv", "a0.csv", "summary.csv"],
        ),
        (
            "synthesize",
            &["control_u.csv", "control_v.csv", "control_phi.csv", "trajectory.csv", "summary.csv"],
        ),
        ("verify", &["verify.csv"]),
        ("sweep", &["sweep.csv"]),
        (
            "figures",
            &["figure_impulsive_u.csv", "figure_impulsive_u0.csv", "figure_nonimpulsive_u.csv", "figure_nonimpulsive_u0.csv"],
        ),
    ];
    for (cmd, files) in expect {
        let dir = tmp.path().join(cmd);
        run_ok(&["--output", dir.to_str().unwrap(), cmd]);
        for f in files {
            assert!(dir.join(f).is_file(), "{cmd}: {f}");
        }
    }
    let sweep = read(&tmp.path().join("sweep"), "sweep.csv");
    assert!(sweep.starts_with("alpha,measured_error,predicted_error,outer_iters,status\n"));
    let traj = read(&tmp.path().join("simulate"), "trajectory.csv");
    assert!(traj.starts_with("t,side,x0,x1\n"));
    let gram = read(&tmp.path().join("gramian"), "summary.csv");
    assert!(gram.contains("a0,A0-satisfied"));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"synthesis": {"mode": "semilinear"}, "quadrature": {"order": 6, "panels": 8}}"#,
    );
    let cfg = cfg.to_str().unwrap();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let dir = tmp.path().join(name);
        run_ok(&["--config", cfg, "--output", dir.to_str().unwrap(), "--jobs", jobs, "sweep"]);
        run_ok(&["--config", cfg, "--output", dir.to_str().unwrap(), "synthesize"]);
    }
    for f in ["sweep.csv", "control_u.csv", "control_v.csv", "control_phi.csv", "trajectory.csv", "summary.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn linear_sweep_on_the_rotation_matches_prediction() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["--output", tmp.path().to_str().unwrap(), "sweep"]);
    let table = rows(&read(tmp.path(), "sweep.csv"));
    assert_eq!(table.len(), 9);
    for r in table {
        let measured: f64 = r[1].parse().unwrap();
        let predicted: f64 = r[2].parse().unwrap();
        assert!((measured - predicted).abs() <= 1e-8 * predicted, "{r:?}");
        assert_eq!(r[4], "ok");
    }
}

#[test]
fn uncontrolled_linear_simulation_is_the_free_flow() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"impulses": [], "nonlinearity": {"kind": "none"}}"#);
    run_ok(&["--config", cfg.to_str().unwrap(), "--output", tmp.path().to_str().unwrap(), "simulate"]);
    let traj = Trajectory::from_csv(&read(tmp.path(), "trajectory.csv")).unwrap();
    assert_eq!(traj.impulse_count(), 0);
    for (t, _, x) in traj.samples() {
        assert!((x[0] - t.cos()).abs() < 1e-13 && (x[1] + t.sin()).abs() < 1e-13);
    }
}

#[test]
fn trajectory_csv_survives_reingestion_as_forcing() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["--output", tmp.path().to_str().unwrap(), "simulate"]);
    let text = read(tmp.path(), "trajectory.csv");
    let traj = Trajectory::from_csv(&text).unwrap();
    assert_eq!(traj.impulse_count(), 1);
    let rebuilt: Vec<Segment> = traj
        .segments()
        .iter()
        .map(|seg| {
            let f = TabulatedForcing::from_samples(seg.times.clone(), seg.states.clone()).unwrap();
            Segment {
                times: seg.times.clone(),
                states: seg.times.iter().map(|&t| f.eval(t)).collect(),
            }
        })
        .collect();
    assert_eq!(Trajectory::new(rebuilt).unwrap().to_csv(), text);
}

#[test]
fn tabulated_forcing_passes_verification() {
    let tmp = TempDir::new().unwrap();
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 2.0 / 400.0).collect();
    let values: Vec<Vec<f64>> = times.iter().map(|t| vec![0.0, 0.1 * t.sin()]).collect();
    let json = format!(
        r#"{{"nonlinearity": {{"kind": "tabulated", "times": {}, "values": {}}},
            "synthesis": {{"alphas": [0.1, 0.01, 0.001]}}}}"#,
        serde_json::to_string(&times).unwrap(),
        serde_json::to_string(&values).unwrap()
    );
    let cfg = write_config(tmp.path(), "c.json", &json);
    run_ok(&["--config", cfg.to_str().unwrap(), "--output", tmp.path().to_str().unwrap(), "verify"]);
    let table = rows(&read(tmp.path(), "verify.csv"));
    assert_eq!(table.len(), 3);
    for r in &table {
        assert!(r[2].parse::<f64>().unwrap() <= 1e-8);
        assert_eq!(r[5], "pass");
    }

    let out = tmp.path().join("literal");
    run_ok(&["--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--paper-literal-control", "verify"]);
    let table = rows(&read(&out, "verify.csv"));
    assert!(table.iter().all(|r| r[5] == "fail" && r[2].parse::<f64>().unwrap() > 1e-8));
}

#[test]
fn figures_show_the_jump_only_with_impulses() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["--output", tmp.path().to_str().unwrap(), "figures"]);
    for (name, jumps) in [
        ("figure_impulsive_u.csv", true),
        ("figure_impulsive_u0.csv", true),
        ("figure_nonimpulsive_u.csv", false),
        ("figure_nonimpulsive_u0.csv", false),
    ] {
        let t = Trajectory::from_csv(&read(tmp.path(), name)).unwrap();
        assert_eq!(t.impulse_count() == 1, jumps, "{name}");
        if jumps {
            assert!((t.right_limit(0) - t.left_limit(0)).norm() > 0.5);
        }
    }
    let with_u = read(tmp.path(), "figure_impulsive_u.csv");
    assert_ne!(with_u, read(tmp.path(), "figure_impulsive_u0.csv"));
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let case = |name: &str, json: &str, cmd: &str| {
        let cfg = write_config(tmp.path(), name, json);
        impctl(&["--config", cfg.to_str().unwrap(), "--output", out, cmd])
    };

    assert_eq!(case("a.json", r#"{"modle": {}}"#, "simulate").0, 2);
    assert_eq!(case("b.json", r#"{"synthesis": {"damping": 0.01}}"#, "synthesize").0, 2);
    assert_eq!(case("c.json", r#"{"model": {"generator": [[0, 1], [1]], "input_map": [[1], [0]], "horizon": 1}}"#, "simulate").0, 2);
    assert_eq!(case("d.json", r#"{"model": {"preset": "rotation-example", "eigenvalues": [1]}}"#, "simulate").0, 2);
    assert_eq!(case("e.json", r#"{"synthesis": {"alphas": [0.1, 0.2]}}"#, "sweep").0, 2);
    assert_eq!(impctl(&["--model", "nope", "--output", out, "simulate"]).0, 2);
    assert_eq!(impctl(&["--output", out, "--jobs", "0", "sweep"]).0, 2);

    let (code, err) = case(
        "f.json",
        r#"{"model": {"generator": [[800]], "input_map": [[1]], "horizon": 2, "initial_state": [1]}}"#,
        "simulate",
    );
    assert_eq!(code, 3, "{err}");

    let (code, _) = case("g.json", r#"{"synthesis": {"max_outer": 2}}"#, "synthesize");
    assert_eq!(code, 4);
    let history = rows(&read(Path::new(out), "iterate_history.csv"));
    assert_eq!(history.len(), 2);
}

#[test]
fn neutral_convention_flag_reaches_the_neutral_preset() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("paper");
    let b = tmp.path().join("standard");
    run_ok(&["--model", "heat-neumann", "--alpha", "0.001", "--output", a.to_str().unwrap(), "sweep"]);
    run_ok(&[
        "--model",
        "heat-neumann",
        "--alpha",
        "0.001",
        "--neutral-convention",
        "standard",
        "--output",
        b.to_str().unwrap(),
        "sweep",
    ]);
    let (pa, pb) = (read(&a, "sweep.csv"), read(&b, "sweep.csv"));
    assert_ne!(pa, pb);
    assert_eq!(rows(&pa).len(), 1);
    // ignored on a model without a neutral term
    run_ok(&["--neutral-convention", "standard", "--output", a.to_str().unwrap(), "simulate"]);
    assert_eq!(impctl(&["--neutral-convention", "other", "simulate"]).0, 2);
}

#[test]
fn default_config_round_trips_through_json() {
    let cfg = RunConfig::default();
    let back = RunConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    let setup = back.setup().unwrap();
    assert_eq!(setup.system.dim(), 2);
    assert_eq!(setup.alphas.len(), 9);
}
