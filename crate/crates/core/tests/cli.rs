mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cindep(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cindep"))
        .args(args)
        .arg("--quiet")
        .env("CINDEP_CACHE_DIR", cache)
        .output()
        .unwrap()
}

fn write_m1(dir: &Path, n: usize) -> String {
    let data = common::m1_data(n, 3);
    let mut body = String::from("x,y,z\n");
    for i in 0..n {
        body += &format!("{},{},{}\n", data.column(0)[i], data.column(1)[i], data.column(2)[i]);
    }
    let path = dir.join("m1.csv");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_lists_every_subcommand_and_exit_codes() {
    let out = Command::new(env!("CARGO_BIN_EXE_cindep")).arg("--help").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["test", "calibrate", "pc", "bench", "transform"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
    assert!(text.contains("Exit codes"));
    assert!(text.contains("CINDEP_CACHE_DIR"));
}

#[test]
fn test_subcommand_help_documents_method_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_cindep")).args(["test", "--help"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--alpha", "--reps", "--kernel", "--bandwidth-scale", "--bandwidth", "--discrete", "--z"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn test_document_has_decision_fields() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_m1(dir.path(), 60);
    let out = cindep(
        dir.path(),
        &["test", "--data", &csv, "--x", "x", "--y", "y", "--z", "z", "--reps", "200", "--seed", "4"],
    );
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["command"], "test");
    assert_eq!(doc["seed"], 4);
    let result = &doc["result"];
    for key in ["statistic", "p_value", "reject", "critical_values", "bandwidths"] {
        assert!(!result[key].is_null(), "missing {key}");
    }
    let p = result["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn text_format_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_m1(dir.path(), 40);
    let target = dir.path().join("out.txt");
    let out = cindep(
        dir.path(),
        &[
            "test", "--data", &csv, "--x", "x", "--y", "y", "--z", "z", "--reps", "100", "--seed", "1",
            "--format", "text", "--output", target.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("p_value"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_m1(dir.path(), 40);
    let missing = cindep(dir.path(), &["test", "--data", &csv, "--x", "nope", "--y", "y"]);
    assert_eq!(missing.status.code(), Some(3));
    let no_file = cindep(dir.path(), &["test", "--data", "/nonexistent.csv", "--x", "x", "--y", "y"]);
    assert_ne!(no_file.status.code(), Some(0));
    let bad_dims = cindep(dir.path(), &["calibrate", "--n", "50", "--dims", "1,1"]);
    assert_eq!(bad_dims.status.code(), Some(2));
    let unknown = cindep(dir.path(), &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    let budget = cindep(dir.path(), &["calibrate", "--n", "100000", "--dims", "1,1,1", "--reps", "100000"]);
    assert_eq!(budget.status.code(), Some(4));
}

#[test]
fn calibrate_writes_cache_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = cindep(dir.path(), &["calibrate", "--n", "30", "--dims", "1,1,1", "--reps", "50", "--seed", "2"]);
    assert!(out.status.success());
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn transform_emits_unit_interval_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_m1(dir.path(), 50);
    let out = cindep(dir.path(), &["transform", "--data", &csv, "--x", "x", "--y", "y", "--z", "z", "--seed", "1"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["columns"], serde_json::json!(["u1", "v1", "w1"]));
    let rows = doc["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 50);
    for row in rows {
        for u in row.as_array().unwrap() {
            assert!((0.0..=1.0).contains(&u.as_f64().unwrap()));
        }
    }
}

#[test]
fn pc_orients_a_collider_and_writes_dot() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::m1_data(400, 3);
    let mut body = String::from("a,b,c\n");
    for i in 0..data.n() {
        let z = data.column(2)[i];
        let (a, b) = (data.column(0)[i] - z, data.column(1)[i] - z);
        body += &format!("{a},{b},{}\n", a + b + 0.5 * z);
    }
    let csv = dir.path().join("col.csv");
    std::fs::write(&csv, body).unwrap();
    let dot = dir.path().join("g.dot");
    let out = cindep(
        dir.path(),
        &["pc", "--data", csv.to_str().unwrap(), "--test", "pcor", "--dot", dot.to_str().unwrap(), "--seed", "1", "--format", "text"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("a: -> c"), "{text}");
    assert!(text.contains("b: -> c"), "{text}");
    let dot = std::fs::read_to_string(dot).unwrap();
    assert!(dot.contains("digraph"));
}
