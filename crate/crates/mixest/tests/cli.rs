//! CLI contract tests: exit codes, error channels, and output shapes.

use std::process::Command;

fn mixest() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixest"))
}

#[test]
fn version_and_help_exit_zero() {
    let out = mixest().arg("--version").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("formats v1"), "version line: {text}");

    let help = mixest().arg("--help").output().unwrap();
    assert!(help.status.success());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = mixest().args(["fit", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixest()
        .args(["simulate", "--config", "missing.json", "--out", "o"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("error"), "stderr: {err}");
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x\n1.0\nnot-a-number\n").unwrap();
    let out = mixest()
        .args(["fit", "--method", "pmle", "--input", "bad.csv"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_requires_matching_arguments() {
    let out = mixest().args(["eval", "--metric", "ari"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "ari without label files");

    let out = mixest().args(["eval", "--metric", "l2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "l2 without mixtures");
}

#[test]
fn eval_l2_rejects_family_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("a.json"),
        r#"{"family":"normal","weights":[1.0],"locations":[0],"scales":[1]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("b.json"),
        r#"{"family":"gumbel","weights":[1.0],"locations":[0],"scales":[1]}"#,
    )
    .unwrap();
    let out = mixest()
        .args(["eval", "--metric", "l2", "--g1", "a.json", "--g2", "b.json"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_rejects_a_n_with_mwde() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "1.0\n2.0\n3.0\n4.0\n").unwrap();
    let out = mixest()
        .args([
            "fit", "--method", "mwde", "--input", "d.csv", "--a-n", "0.5",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_mixture_json_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"family":"normal","weights":[0.7,0.7],"locations":[0,1],"scales":[1,1]}"#,
    )
    .unwrap();
    let out = mixest()
        .args([
            "eval",
            "--metric",
            "overlap",
            "--g1",
            "bad.json",
            "--resolution",
            "1000",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_fit_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    // Two points cannot support a two-component fit (N > K fails).
    std::fs::write(dir.path().join("tiny.csv"), "1.0\n2.0\n").unwrap();
    let out = mixest()
        .args(["fit", "--method", "mwde", "--k", "2", "--input", "tiny.csv"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_ppm_image_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("img.ppm"), b"P5\n2 2\n255\n1234").unwrap();
    let out = mixest()
        .args(["segment", "--input", "img.ppm", "--out", "seg"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_interchange_model_readable_by_eval() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("value\n");
    // Two clearly separated clumps.
    for i in 0..30 {
        csv.push_str(&format!("{}\n", i as f64 * 0.01));
        csv.push_str(&format!("{}\n", 5.0 + i as f64 * 0.01));
    }
    std::fs::write(dir.path().join("d.csv"), csv).unwrap();
    let fit = mixest()
        .args([
            "fit", "--method", "pmle", "--k", "2", "--input", "d.csv", "--seed", "1", "--out",
            "fit.json",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(
        fit.status.success(),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );

    let eval = mixest()
        .args([
            "eval", "--metric", "l2", "--g1", "fit.json", "--g2", "fit.json",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(eval.status.success());
    let text = String::from_utf8(eval.stdout).unwrap();
    let value: f64 = text
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(1))
        .and_then(|v| v.parse().ok())
        .expect("csv value row");
    assert!(value.abs() < 1e-9, "self distance {value}");
}
