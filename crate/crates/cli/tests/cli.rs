//! End-to-end contract tests of the binary: headers, formats, exit codes,
//! determinism, and flag/config precedence.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arrival"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn transition_emits_the_exact_header_and_full_precision() {
    let out = run(&["transition", "--level", "1", "--t-max", "2", "--points", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,p,err_bound"));
    let first = lines.next().unwrap();
    // 17 significant digits in scientific notation
    assert!(first.starts_with("0.0000000000000000e0,"), "{first}");
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), 3);
    }
}

#[test]
fn density_and_trajectory_headers() {
    let out = run(&["density", "--level", "1", "--points", "16"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("t,w"));

    let out = run(&["trajectories", "--points", "3"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("trajectory_id,t,x"));
}

#[test]
fn leavens_matches_transition_for_a_fresh_detector() {
    let args_tail =
        ["--level", "2", "--t-on", "0", "--t-min", "0", "--t-max", "5", "--points", "21"];
    let mut t_args = vec!["transition"];
    t_args.extend_from_slice(&args_tail);
    let mut l_args = vec!["leavens"];
    l_args.extend_from_slice(&args_tail);
    let p = rows(&stdout(&run(&t_args)));
    let l = rows(&stdout(&run(&l_args)));
    for (a, b) in p.iter().zip(&l) {
        assert!((a[1] - b[1]).abs() < 1e-9, "{} vs {}", a[1], b[1]);
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["transition", "--level", "1", "--points", "1"]).status.code(), Some(2));
    assert_eq!(run(&["transition"]).status.code(), Some(2)); // missing --level
    assert_eq!(run(&["transition", "--level", "1", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(
        run(&["transition", "--level", "1", "--t-min", "3", "--t-max", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["transition", "--level", "1", "--format", "xml"]).status.code(),
        Some(2)
    );
}

#[test]
fn numerical_failures_exit_3() {
    // a zero detector position never collects any crossing mass, so the
    // conditional normalization is degenerate
    let out = run(&[
        "leavens",
        "--level",
        "0",
        "--normalize",
        "--t-max",
        "5",
        "--points",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_exit_codes_and_fault_hook() {
    let ok = run(&["verify", "--seed", "3"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("result: PASS"));

    let bad = run(&["verify", "--seed", "3", "--perturb-velocity", "1e-3"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("result: FAIL"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "transition",
        "--level",
        "1.5",
        "--t-max",
        "3",
        "--points",
        "11",
        "--numeric",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[region]\nlevel = 1.0\nt_on = 0.0\n\n[grid]\nt_max = 2.0\npoints = 5\n",
    )
    .unwrap();
    let from_file = run(&["transition", "--config", path.to_str().unwrap()]);
    assert!(from_file.status.success());
    assert_eq!(rows(&stdout(&from_file)).len(), 5);

    let overridden =
        run(&["transition", "--config", path.to_str().unwrap(), "--points", "3"]);
    assert!(overridden.status.success());
    assert_eq!(rows(&stdout(&overridden)).len(), 3);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[grid]\ntmax = 2.0\n").unwrap();
    let out = run(&["transition", "--level", "1", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_mirrors_the_csv_rows() {
    let csv = run(&["transition", "--level", "1", "--t-max", "2", "--points", "4"]);
    let json = run(&[
        "transition", "--level", "1", "--t-max", "2", "--points", "4", "--format", "json",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(doc["columns"], serde_json::json!(["t", "p", "err_bound"]));
    assert_eq!(doc["metadata"]["command"], "transition");
    assert_eq!(doc["metadata"]["kind"], "TransitionP");
    let json_rows = doc["rows"].as_array().unwrap();
    let csv_rows = rows(&stdout(&csv));
    assert_eq!(json_rows.len(), csv_rows.len());
    for (jr, cr) in json_rows.iter().zip(&csv_rows) {
        for (jv, cv) in jr.as_array().unwrap().iter().zip(cr) {
            assert_eq!(jv.as_f64().unwrap(), *cv);
        }
    }
}

#[test]
fn output_files_and_compare_sibling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let out = run(&[
        "density",
        "--level",
        "100",
        "--compare",
        "--t-a",
        "-173.20508075688772",
        "--t-max",
        "300",
        "--points",
        "7",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let main = std::fs::read_to_string(&path).unwrap();
    let second = std::fs::read_to_string(dir.path().join("w.leavens.csv")).unwrap();
    assert_eq!(main.lines().next(), Some("t,w"));
    assert_eq!(second.lines().next(), Some("t,w"));
    assert_ne!(main, second);
}

#[test]
fn physical_units_convert_at_the_boundary() {
    // delta = 2 maps level 2 -> 1 and T = 8 -> t = 2
    let physical = run(&[
        "transition", "--physical", "--delta", "2", "--level", "2", "--t-max", "8",
        "--points", "3",
    ]);
    let dimensionless =
        run(&["transition", "--level", "1", "--t-max", "2", "--points", "3"]);
    let p = rows(&stdout(&physical));
    let d = rows(&stdout(&dimensionless));
    for (a, b) in p.iter().zip(&d) {
        assert_eq!(a[0], 4.0 * b[0]); // abscissa back in physical units
        assert!((a[1] - b[1]).abs() < 1e-15);
    }
}

#[test]
fn trajectory_fan_is_symmetric_and_the_axis_stays_put() {
    let out = run(&["trajectories", "--t-min", "-3", "--t-max", "3", "--points", "7"]);
    let table = rows(&stdout(&out));
    // default fan: seven starting positions, one of them zero
    let ids: std::collections::BTreeSet<u64> = table.iter().map(|r| r[0] as u64).collect();
    assert_eq!(ids.len(), 7);
    for r in &table {
        if r[0] == 3.0 {
            assert_eq!(r[2], 0.0); // x0 = 0 row is identically zero
        }
    }
    // time-reflection symmetry of every orbit
    for id in 0..7 {
        let orbit: Vec<&Vec<f64>> = table.iter().filter(|r| r[0] == id as f64).collect();
        for k in 0..orbit.len() {
            let mirrored = &orbit[orbit.len() - 1 - k];
            assert!((orbit[k][2] - mirrored[2]).abs() < 1e-12);
        }
    }
}

#[test]
fn integrated_trajectories_match_the_closed_form() {
    let closed = run(&["trajectories", "--x0", "0.7", "--x0", "-1.1", "--points", "13"]);
    let numeric = run(&[
        "trajectories", "--x0", "0.7", "--x0", "-1.1", "--points", "13", "--integrate",
    ]);
    let a = rows(&stdout(&closed));
    let b = rows(&stdout(&numeric));
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert!((ra[2] - rb[2]).abs() < 1e-8, "{} vs {}", ra[2], rb[2]);
    }
}

#[test]
fn superposition_packets_come_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("packet.toml");
    std::fs::write(
        &path,
        concat!(
            "[packet]\nkind = \"superposition\"\n\n",
            "[[packet.terms]]\ncoefficient_re = 1.0\nshift_x = -1.2\n\n",
            "[[packet.terms]]\ncoefficient_re = 0.8\nshift_x = 1.2\n",
        ),
    )
    .unwrap();
    let out = run(&[
        "transition",
        "--config",
        path.to_str().unwrap(),
        "--level",
        "1",
        "--t-max",
        "2",
        "--points",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&stdout(&out));
    assert!(table[2][1] > 0.0 && table[2][1] < 0.5);
}

#[test]
fn help_is_available() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for sub in ["transition", "leavens", "density", "trajectories", "verify"] {
        assert!(text.contains(sub), "missing {sub} in help");
    }
}

#[test]
fn missing_config_file_exits_2() {
    let out = run(&["transition", "--level", "1", "--config", "/no/such/file.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new("/no/such/file.toml").exists());
}
