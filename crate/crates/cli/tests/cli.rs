//! Behavior tests for the `howson` binary: output routing, determinism,
//! the `@file` argument convention, and the exit-code partition.

use std::fs;
use std::process::{Command, Output};

const DOUBLING: &str = "rank 2; a -> a^2; b -> b^2";
const DIAG_2_3: &str = "product; A: dim 1; [[2]]; B: dim 1; [[3]]";

fn howson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_howson")).args(args).output().expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn analyze_reports_the_hypotheses() {
    let out = howson(&["analyze", DOUBLING]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("kind: free"));
    assert!(text.contains("injective: yes"));
    assert!(text.contains("surjective: no"));
    assert!(text.contains("image index: infinite"));

    let json_out = howson(&["analyze", DOUBLING, "--format", "json"]);
    assert_eq!(exit_code(&json_out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    assert_eq!(report["injective"], true);
    assert_eq!(report["surjective"], false);
    assert_eq!(report["image_rank"], 2);
}

#[test]
fn analyze_rejects_garbage_specs() {
    let out = howson(&["analyze", "rank 2; a -> "]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("input error"));
}

#[test]
fn certificate_json_is_byte_identical_across_runs() {
    let args =
        ["certify", DOUBLING, "--rmax", "3", "--fp-samples", "300", "--l2-samples", "200"];
    let first = howson(&args);
    let second = howson(&args);
    assert_eq!(exit_code(&first), 0);
    assert_eq!(first.stdout, second.stdout, "output must be deterministic");
    let cert: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(cert["schema"], 1);
    assert_eq!(cert["kind"], "theorem2");
    assert_eq!(cert["levels"].as_array().unwrap().len(), 4);
}

#[test]
fn out_flag_writes_the_file_and_keeps_stdout_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let out = howson(&[
        "certify3",
        DIAG_2_3,
        "--depth",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(stdout(&out).is_empty(), "JSON goes only to the file");
    let cert: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(cert["kind"], "theorem3");
    assert_eq!(cert["witness"], "b");
    // The temp sibling used for the atomic write must be gone.
    assert!(!dir.path().join("cert.json.tmp").exists());
}

#[test]
fn certify_table_format_summarizes_the_certificate() {
    let out = howson(&[
        "certify", DOUBLING, "--rmax", "2", "--single", "--fp-samples", "200",
        "--l2-samples", "100", "--format", "table",
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("kind: theorem2"));
    assert!(text.contains("complement: a b a^-1"));
    assert!(text.contains("level  rank"));
}

#[test]
fn verify_accepts_the_round_trip_and_names_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let created = howson(&[
        "certify", DOUBLING, "--rmax", "3", "--single", "--fp-samples", "300",
        "--l2-samples", "200", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&created), 0);

    let ok = howson(&["verify", path.to_str().unwrap()]);
    assert_eq!(exit_code(&ok), 0);
    assert!(stdout(&ok).contains("certificate verified"));

    let mut cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let rank = cert["levels"][1]["rank"].as_u64().unwrap();
    cert["levels"][1]["rank"] = (rank + 1).into();
    fs::write(&path, serde_json::to_string(&cert).unwrap()).unwrap();
    let bad = howson(&["verify", path.to_str().unwrap()]);
    assert_eq!(exit_code(&bad), 1);
    assert!(stdout(&bad).contains("FAIL level_1_rank"), "stdout: {}", stdout(&bad));
    assert!(stderr(&bad).contains("level_1_rank"));
}

#[test]
fn verify_treats_broken_input_as_an_input_error() {
    let dir = tempfile::tempdir().unwrap();

    let truncated = dir.path().join("truncated.json");
    let full = howson(&[
        "certify", DOUBLING, "--rmax", "2", "--single", "--fp-samples", "200",
        "--l2-samples", "100",
    ]);
    let text = stdout(&full);
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let out = howson(&["verify", truncated.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);

    let missing = howson(&["verify", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(exit_code(&missing), 2);

    // Unknown fields mean the certificate was not produced by this tool.
    let mut cert: serde_json::Value = serde_json::from_str(&text).unwrap();
    cert["extra"] = "field".into();
    let extra = dir.path().join("extra.json");
    fs::write(&extra, serde_json::to_string(&cert).unwrap()).unwrap();
    let out = howson(&["verify", extra.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn at_file_arguments_are_read_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    fs::write(&spec, format!("{DOUBLING}\n")).unwrap();
    let via_file = howson(&["analyze", &format!("@{}", spec.display())]);
    let direct = howson(&["analyze", DOUBLING]);
    assert_eq!(exit_code(&via_file), 0);
    assert_eq!(via_file.stdout, direct.stdout);

    let missing = howson(&["analyze", "@/no/such/file"]);
    assert_eq!(exit_code(&missing), 2);
}

#[test]
fn nf_prints_the_canonical_triple() {
    let out = howson(&["nf", DIAG_2_3, "(t b)^3"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("normal form: t^3 b^13"), "got: {text}");
    assert!(text.contains("m: 3"));
    assert!(text.contains("n: 0"));

    let json_out = howson(&["nf", DIAG_2_3, "(t b)^3", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    assert_eq!(report["display"], "t^3 b^13");
    assert_eq!(report["t_exponent"], 3);
    assert_eq!(report["in_base"], false);
}

#[test]
fn nf_exit_codes_separate_parse_errors_from_depth_breaches() {
    let parse = howson(&["nf", DOUBLING, "a ^^ b"]);
    assert_eq!(exit_code(&parse), 2);

    let deep = howson(&["nf", DOUBLING, "t^-20 a t^20", "--depth-limit", "10"]);
    assert_eq!(exit_code(&deep), 5);
    assert!(stderr(&deep).contains("depth guard"));
}

#[test]
fn rank_growth_emits_the_rank_table() {
    let out = howson(&["rank-growth", DOUBLING, "--rmax", "3"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("complement: b a b^-1, a b a^-1"), "got: {text}");
    assert!(text.contains("    3     8"));

    let json_out = howson(&["rank-growth", DOUBLING, "--rmax", "3", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    assert_eq!(report["ranks"], serde_json::json!([2, 4, 6, 8]));

    let single = howson(&["rank-growth", DOUBLING, "--rmax", "3", "--single", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&single)).unwrap();
    assert_eq!(report["ranks"], serde_json::json!([1, 2, 3, 4]));
}

#[test]
fn rank_growth_gates_hypotheses_like_certify() {
    let identity = howson(&["rank-growth", "rank 2; a -> a; b -> b"]);
    assert_eq!(exit_code(&identity), 3);
    let nonfree = howson(&["rank-growth", DIAG_2_3]);
    assert_eq!(exit_code(&nonfree), 3);
}

#[test]
fn certify3_rejects_witnesses_inside_the_image() {
    let out = howson(&["certify3", DIAG_2_3, "--witness", "b^3"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("witness"));

    let good = howson(&["certify3", DIAG_2_3, "--witness", "b^2", "--depth", "3"]);
    assert_eq!(exit_code(&good), 0);
    let cert: serde_json::Value = serde_json::from_str(&stdout(&good)).unwrap();
    assert_eq!(cert["witness"], "b^2");
}
