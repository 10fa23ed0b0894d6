use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmatch")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(qmatch(&["match"]).status.code(), Some(2));
    assert_eq!(qmatch(&["match", "--query", "0h", "--t", "1", "--auto-m", "1"]).status.code(), Some(2));
    assert_eq!(qmatch(&["nonsense"]).status.code(), Some(2));
    assert_eq!(qmatch(&["match", "--query", "zz"]).status.code(), Some(2));
    assert_eq!(qmatch(&["match", "--query", "0h", "--threshold", "1.5"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    let out = qmatch(&[
        "match", "--query", "0h", "--prep", "aae",
        "--query-params", missing.to_str().unwrap(),
        "--database-params", missing.to_str().unwrap(),
        "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn match_writes_requested_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmatch(&["match", "--query", "0h", "--auto-m", "1", "--format", "csv,json,svg", "--out", &out_arg(dir.path())]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("match.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,label,probability,similarity,hamming_distance,group"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1], "0h");
    assert!((first[2].parse::<f64>().unwrap() - 0.2831).abs() < 1e-4);
    assert!(csv.lines().last().unwrap().starts_with("others,"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("match.json")).unwrap()).unwrap();
    assert_eq!(json["match_index"], 0);
    assert_eq!(json["report"]["iterations"], 5);
    assert!(fs::read_to_string(dir.path().join("match.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"schema_version": 1, "match": {"query": "2h", "t": 3}}"#).unwrap();
    let out = qmatch(&["--config", cfg.to_str().unwrap(), "match", "--t", "0", "--out", &out_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("match.csv")).unwrap();
    // query 2h sits at index 1; t = 0 keeps the 1/8 ceiling
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[1], "2h");
    assert!((row[2].parse::<f64>().unwrap() - 0.125).abs() < 1e-12);

    fs::write(&cfg, r#"{"schema_version": 9}"#).unwrap();
    assert_eq!(qmatch(&["--config", cfg.to_str().unwrap(), "match"]).status.code(), Some(2));
    fs::write(&cfg, r#"{"schema_version": 1, "bogus": true}"#).unwrap();
    assert_eq!(qmatch(&["--config", cfg.to_str().unwrap(), "match"]).status.code(), Some(2));
}

#[test]
fn trained_params_feed_back_into_match() {
    let dir = tempfile::tempdir().unwrap();
    let (q, d) = (dir.path().join("q"), dir.path().join("d"));
    let train = |target: &str, out: &Path, iters: &str| {
        let mut args = vec!["train-aae", "--target", target, "--iterations", iters, "--format", "csv,json"];
        if target == "query" {
            args.extend(["--image", "0h"]);
        }
        args.extend(["--out", out.to_str().unwrap()]);
        let o = qmatch(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    train("query", &q, "100");
    train("database", &d, "50");
    let losses = fs::read_to_string(q.join("train_loss.csv")).unwrap();
    assert_eq!(losses.lines().count(), 101);
    let out = qmatch(&[
        "match", "--query", "0h", "--prep", "aae",
        "--query-params", q.join("trained_params.json").to_str().unwrap(),
        "--database-params", d.join("trained_params.json").to_str().unwrap(),
        "--format", "json", "--out", &out_arg(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("match.json")).unwrap()).unwrap();
    assert!(json["encoder_fidelity"].is_array());
}

#[test]
fn grover_scan_tracks_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmatch(&["grover-scan", "--query", "0h", "--t-max", "8", "--out", &out_arg(dir.path())]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("grover_scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9 * 9);
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (s, a): (f64, f64) = (f[3].parse().unwrap(), f[4].parse().unwrap());
        assert!((s - a).abs() < 1e-10, "{line}");
    }
}

#[test]
fn noise_study_covers_both_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmatch(&["noise-study", "--seeds", "2", "--sigma0", "0.1,0.3", "--out", &out_arg(dir.path())]);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("noise_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("frqi,") && rows[3].starts_with("neqr,"));
    assert_eq!(summary.matches("scheme,").count(), 1);
}
