use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cvphase::phase_space::io::read_field;
use serde_json::Value;

fn cvphase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvphase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![scenario, "--out", out];
    args.extend_from_slice(extra);
    cvphase(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn scenarios_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "scan.json",
        r#"{"state": {"kind": "fock-mixture", "t": 1.0},
            "scan": {"points_per_axis": 5, "random_points": 4},
            "seed": 7}"#,
    );
    for (scenario, extra) in [
        ("steer-sweep", vec![]),
        ("counterexample", vec!["--config", cfg.as_str()]),
        ("remote-negativity", vec!["--grid-n", "64"]),
        ("chain-audit", vec![]),
        ("field-dump", vec!["--grid-n", "32"]),
    ] {
        let a = tmp.path().join(format!("{scenario}-a"));
        let b = tmp.path().join(format!("{scenario}-b"));
        assert!(run_in(&a, scenario, &extra).status.success(), "{scenario}");
        assert!(run_in(&b, scenario, &extra).status.success(), "{scenario}");
        assert_eq!(dir_contents(&a), dir_contents(&b), "{scenario}");
    }
}

#[test]
fn seed_changes_random_points_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"scan": {"points_per_axis": 3, "random_points": 3}}"#,
    );
    let read = |seed: &str| {
        let dir = tmp.path().join(seed);
        assert!(run_in(&dir, "counterexample", &["--config", &cfg, "--seed", seed]).status.success());
        fs::read_to_string(dir.join("certificates.csv")).unwrap()
    };
    let (a, b) = (read("1"), read("2"));
    let lattice = |s: &str| s.lines().take(10).collect::<Vec<_>>().join("\n");
    assert_eq!(lattice(&a), lattice(&b));
    assert_ne!(a, b);
    assert_eq!(a.lines().count(), 1 + 9 + 3);
}

#[test]
fn steer_sweep_default_rows() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_in(tmp.path(), "steer-sweep", &[]).status.success());
    let mut rdr = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for (row, r) in rows.iter().zip([0.0f64, 0.25, 0.5, 1.0]) {
        let defect: f64 = row[1].parse().unwrap();
        assert!((defect - (1.0 / (2.0 * r).cosh() - 1.0)).abs() < 1e-12);
        assert_eq!(&row[3], if r == 0.0 { "false" } else { "true" });
        assert_eq!(&row[8], &row[3]);
    }
    let manifest = json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["status"], "pass");
    assert_eq!(manifest["outputs"][0], "sweep.csv");
}

#[test]
fn eta_sweep_flips_once() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eta.json",
        r#"{"state": {"kind": "tmsv", "r": 0.7},
            "sweep": {"parameter": "eta", "start": 0.0, "end": 1.0, "steps": 20}}"#,
    );
    assert!(run_in(tmp.path(), "steer-sweep", &["--config", &cfg]).status.success());
    let report = json(&tmp.path().join("report.json"));
    for key in ["gaussian_steerable", "certified", "reid"] {
        let flips = report["flips"][key].as_array().unwrap();
        assert_eq!(flips.len(), 1, "{key}");
        let lo = flips[0][0].as_f64().unwrap();
        let hi = flips[0][1].as_f64().unwrap();
        assert!(lo < 0.5 && 0.5 < hi);
    }
}

#[test]
fn counterexample_scenario_asserts_coverage_and_no_steering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "counterexample", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("report.json"));
    assert_eq!(report["certified"], 441);
    assert_eq!(report["reid"]["steering"], false);
    let origin = &report["at_mean"]["certificate"];
    assert_eq!(origin["witness"]["level"], 1);
    assert!((origin["value"].as_f64().unwrap() + 0.75).abs() < 1e-6);

    // A TMSV is certified everywhere too, but it steers: the scenario fails.
    let cfg = write_config(
        tmp.path(),
        "tmsv.json",
        r#"{"state": {"kind": "tmsv", "r": 0.5}, "scan": {"points_per_axis": 3}}"#,
    );
    let dir = tmp.path().join("tmsv");
    let out = run_in(&dir, "counterexample", &["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&dir.join("manifest.json"))["status"], "fail");
}

#[test]
fn small_thermal_parameter_keeps_full_coverage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "t.json", r#"{"state": {"kind": "fock-mixture", "t": 0.2}}"#);
    let out = run_in(tmp.path(), "counterexample", &["--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&tmp.path().join("report.json"))["coverage"], 1.0);
}

#[test]
fn remote_negativity_exports_the_heralded_field() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_in(tmp.path(), "remote-negativity", &[]).status.success());
    let report = json(&tmp.path().join("report.json"));
    assert!((report["success_probability"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let min = report["alice"]["min_value"].as_f64().unwrap();
    assert!((min + 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-9);
    let field = read_field(&tmp.path().join("alice_field.json")).unwrap();
    assert_eq!(field.grid().points_per_axis(), 128);
    assert!((field.integrate() - 1.0).abs() < 1e-9);

    let cfg = write_config(
        tmp.path(),
        "product.json",
        r#"{"state": {"kind": "product", "alice_covariance": [[1,0],[0,1]], "bob_covariance": [[3,0],[0,3]]},
            "field_format": "binary"}"#,
    );
    let dir = tmp.path().join("product");
    assert!(run_in(&dir, "remote-negativity", &["--config", &cfg, "--grid-n", "32"]).status.success());
    let report = json(&dir.join("report.json"));
    assert!((report["success_probability"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(report["alice"]["negative_volume"], 0.0);
    assert!(dir.join("alice_field.bin").is_file());
}

#[test]
fn herald_impossible_is_a_run_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "h.json",
        r#"{"state": {"kind": "product", "alice_covariance": [[1,0],[0,1]], "bob_covariance": [[1,0],[0,1]]},
            "herald": {"kind": "fock-projector", "level": 1}}"#,
    );
    let out = run_in(tmp.path(), "remote-negativity", &["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("herald"));
}

#[test]
fn chain_audit_reports_all_variances() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_in(tmp.path(), "chain-audit", &[]).status.success());
    let chain = json(&tmp.path().join("chain.json"));
    for key in ["var_q_cond", "var_p_cond", "product", "flag", "var_c_q", "var_c_p", "witness_point"] {
        assert!(!chain[key].is_null(), "{key}");
    }
    assert_eq!(chain["flag"], true);
}

#[test]
fn field_dump_round_trips_through_a_field_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "j.json", r#"{"dump": {"target": "joint"}}"#);
    let dumped = tmp.path().join("dump");
    assert!(run_in(&dumped, "field-dump", &["--config", &cfg, "--grid-n", "20"]).status.success());
    let joint = read_field(&dumped.join("joint.json")).unwrap();
    assert_eq!(joint.dim(), 4);

    // Feed the sampled joint back in as a state.
    let cfg = write_config(
        tmp.path(),
        "f.json",
        r#"{"state": {"kind": "field", "path": "dump/joint.json", "n_alice_modes": 1, "n_bob_modes": 1},
            "dump": {"target": "bob"}}"#,
    );
    let out_dir = tmp.path().join("bob");
    let out = run_in(&out_dir, "field-dump", &["--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bob = read_field(&out_dir.join("bob.json")).unwrap();
    assert!((bob.integrate() - 1.0).abs() < 1e-3);
}

#[test]
fn config_errors_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"state": {"kind": "tmsv"}}"#,
        r#"{"unknown_key": 1}"#,
        r#"{"scenario": "chain-audit"}"#,
        r#"{"state": {"kind": "field", "path": "missing.json", "n_alice_modes": 1, "n_bob_modes": 1}}"#,
        r#"{"witness": {"families": ["nope"]}}"#,
        r#"{"sweep": {"parameter": "eta", "values": [1.5]}}"#,
        "not json",
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("{i}.json"), body);
        let out = run_in(&tmp.path().join(i.to_string()), "steer-sweep", &["--config", &cfg]);
        assert_eq!(out.status.code(), Some(3), "{body}");
    }
    assert_eq!(run_in(tmp.path(), "steer-sweep", &["--grid-n", "15"]).status.code(), Some(3));
    assert_eq!(cvphase(&["no-such-scenario"]).status.code(), Some(3));
    assert_eq!(cvphase(&["chain-audit", "--config", "/nonexistent.json"]).status.code(), Some(3));
    assert_eq!(cvphase(&["--help"]).status.code(), Some(0));
}
