use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn twosided(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twosided")).args(args).output().unwrap()
}

const ASYMMETRIC: [&str; 10] = [
    "--alpha1", "1", "--lambda1", "3", "--alpha2", "3", "--lambda2", "1", "--r", "1",
];

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_asymmetric_reports_thresholds() {
    let mut args = vec!["solve", "--format", "json"];
    args.extend(ASYMMETRIC);
    let out = twosided(&args);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let x1 = v["solution"]["x1"].as_f64().unwrap();
    let x2 = v["solution"]["x2"].as_f64().unwrap();
    assert!((x1 - 2.7749094).abs() < 1e-6, "x1 = {x1}");
    assert!((x2 - 1.1224392).abs() < 1e-6, "x2 = {x2}");
    assert!(v["diagnostics"]["fixed_point_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn solve_symmetric_has_equal_fields() {
    let out = twosided(&["solve", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["solution"]["x1"], v["solution"]["x2"]);
}

#[test]
fn solve_table_is_default() {
    let out = twosided(&["solve"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("x1")));
}

#[test]
fn invalid_parameter_exits_1_naming_field() {
    let out = twosided(&["solve", "--alpha1", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha1"));
}

#[test]
fn verify_passes_on_examples() {
    let mut args = vec!["verify", "--format", "json"];
    args.extend(ASYMMETRIC);
    for a in [vec!["verify", "--format", "json"], args] {
        let out = twosided(&a);
        assert_eq!(out.status.code(), Some(0));
        let v = json(&out);
        assert_eq!(v["passed"], Value::Bool(true));
        for angle in v["angles"].as_array().unwrap() {
            assert_eq!(angle["smooth_pasting_holds"], Value::Bool(false));
        }
    }
}

#[test]
fn verify_corrupted_solution_exits_2() {
    let out = twosided(&["verify", "--format", "json", "--corrupt-upper", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["verification"]["representation_ok"], Value::Bool(false));
}

#[test]
fn solve_json_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("solution.json");
    let mut args = vec!["solve", "--format", "json", "--output", sol.to_str().unwrap()];
    args.extend(ASYMMETRIC);
    assert_eq!(twosided(&args).status.code(), Some(0));

    let mut direct = vec!["verify", "--format", "json"];
    direct.extend(ASYMMETRIC);
    let a = twosided(&direct);
    let b = twosided(&["verify", "--format", "json", "--solution", sol.to_str().unwrap()]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn angle_reports_both_thresholds() {
    let out = twosided(&["angle", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let angles = v["angles"].as_array().unwrap();
    assert_eq!(angles.len(), 2);
    for a in angles {
        assert!((a["direct_jump"].as_f64().unwrap() - 0.6790040732).abs() < 1e-9);
    }
}

#[test]
fn simulate_is_deterministic_across_worker_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_twosided"))
            .args(["simulate", "--n", "20000", "--seed", "42", "--format", "json"])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("4");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_with_perturbation_passes() {
    let out = twosided(&[
        "simulate", "--n", "50000", "--seed", "3", "--starts", "0", "--perturb", "0.2", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["perturbed"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_accepts_negative_starts() {
    let out = twosided(&["simulate", "--n", "1000", "--starts", "-2,-0.5,3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let first = &v["optimal"][0];
    assert_eq!(first["estimate"]["mean"].as_f64().unwrap(), 2.0);
    assert_eq!(first["estimate"]["stderr"].as_f64().unwrap(), 0.0);
}

#[test]
fn curve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let mut args = vec!["curve", "--output", path.to_str().unwrap()];
    args.extend(ASYMMETRIC);
    assert_eq!(twosided(&args).status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,V,g"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 601);
    assert_eq!(rows[0][0], -3.0);
    assert_eq!(rows[600][0], 3.0);
    for row in &rows {
        assert!(row[1] >= row[2] - 1e-12);
        if row[0] <= -2.7749094 - 1e-6 || row[0] >= 1.1224392 + 1e-6 {
            assert!((row[1] - row[2]).abs() <= 1e-12);
        }
    }
}

#[test]
fn curve_is_symmetric_for_symmetric_model() {
    let out = twosided(&["curve"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for k in 0..v.len() {
        assert!((v[k] - v[v.len() - 1 - k]).abs() <= 1e-12);
    }
}

#[test]
fn curve_empty_grid_and_unwritable_path_exit_1() {
    assert_eq!(twosided(&["curve", "--grid-points", "0"]).status.code(), Some(1));
    assert_eq!(twosided(&["curve", "--output", "/nonexistent/dir/c.csv"]).status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "alpha1 = 1\nlambda1 = 3\nalpha2 = 3\nlambda2 = 1\nr = 1\nformat = \"json\"\n").unwrap();
    let out = twosided(&["solve", "--config", cfg.to_str().unwrap()]);
    let x1 = json(&out)["solution"]["x1"].as_f64().unwrap();
    assert!((x1 - 2.7749094).abs() < 1e-6);
    let out = twosided(&["solve", "--config", cfg.to_str().unwrap(), "--lambda1", "1", "--alpha2", "1"]);
    let v = json(&out);
    assert_eq!(v["solution"]["x1"], v["solution"]["x2"]);
}
