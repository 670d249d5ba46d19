//! Black-box tests of the `dygpp` binary: exit codes, output determinism,
//! and the config override chain.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dygpp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Generate a small world CSV under `dir` and return its path.
fn small_world(dir: &Path) -> std::path::PathBuf {
    let csv = dir.join("world.csv");
    let out = run(&[
        "generate",
        "--passengers",
        "12",
        "--stations",
        "5",
        "--days",
        "8",
        "--seed",
        "5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    csv
}

/// Train a one-epoch throwaway checkpoint on `csv`.
fn tiny_ckpt(dir: &Path, csv: &Path) -> std::path::PathBuf {
    let ckpt = dir.join("tiny.ckpt");
    let out = run(&[
        "train",
        "--data",
        csv.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--set",
        "model.dim_node=4",
        "--set",
        "model.dim_edge=2",
        "--set",
        "model.dim_time=4",
        "--set",
        "model.dim_embed=4",
        "--set",
        "model.dim_out=4",
        "--set",
        "model.num_neighbors=4",
        "--set",
        "train.max_epochs=1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    ckpt
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_override_key_is_a_usage_error() {
    let out = run(&["gradcheck", "--set", "no.such.key=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no.such.key"), "{}", stderr(&out));
}

#[test]
fn generate_same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "generate",
            "--passengers",
            "9",
            "--stations",
            "4",
            "--days",
            "5",
            "--seed",
            "21",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "same seed must produce identical CSV bytes"
    );
}

#[test]
fn ingest_summarizes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_world(dir.path());
    let out = run(&["ingest", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("events="), "{text}");
    assert!(text.contains("passengers=12"), "{text}");
    assert!(text.contains("stations=5"), "{text}");
}

#[test]
fn ingest_missing_file_is_a_data_error() {
    let out = run(&["ingest", "/nonexistent/events.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_missing_checkpoint_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_world(dir.path());
    let out = run(&[
        "evaluate",
        "--data",
        csv.to_str().unwrap(),
        "--ckpt",
        "/nonexistent/model.ckpt",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_json_is_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_world(dir.path());
    let ckpt = tiny_ckpt(dir.path(), &csv);
    let args = [
        "evaluate",
        "--data",
        csv.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--set",
        "model.dim_node=4",
        "--set",
        "model.dim_edge=2",
        "--set",
        "model.dim_time=4",
        "--set",
        "model.dim_embed=4",
        "--set",
        "model.dim_out=4",
        "--set",
        "model.num_neighbors=4",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let a = stdout(&first);
    assert_eq!(a, stdout(&second), "metric JSON must be byte-stable");
    assert!(a.trim_start().starts_with('{'), "{a}");
    assert!(a.contains("\"ap\":"), "{a}");
    assert!(a.contains("\"auc\":"), "{a}");
}

#[test]
fn predict_unknown_passenger_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_world(dir.path());
    let ckpt = tiny_ckpt(dir.path(), &csv);
    let out = run(&[
        "predict",
        "--data",
        csv.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--passenger",
        "999999",
        "--station",
        "1",
        "--time",
        "100000",
        "--set",
        "model.dim_node=4",
        "--set",
        "model.dim_edge=2",
        "--set",
        "model.dim_time=4",
        "--set",
        "model.dim_embed=4",
        "--set",
        "model.dim_out=4",
        "--set",
        "model.num_neighbors=4",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("999999"), "{}", stderr(&out));
}

#[test]
fn baseline_prints_metric_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_world(dir.path());
    for method in ["top", "ptop"] {
        let out = run(&["baseline", "--method", method, "--data", csv.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("\"ap\":"), "{text}");
        assert!(text.contains("\"split\":\"test\""), "{text}");
    }
}

#[test]
fn gradcheck_passes_and_honors_tolerance() {
    let ok = run(&["gradcheck", "--max-coords", "64"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("max_rel_err"), "{}", stdout(&ok));

    // An absurdly tight tolerance must trip the dedicated exit code.
    let strict = run(&["gradcheck", "--max-coords", "64", "--tolerance", "1e-30"]);
    assert_eq!(strict.status.code(), Some(4), "{}", stderr(&strict));
}

#[test]
fn set_overrides_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = small_world(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "model.dim_node = 4\nmodel.dim_edge = 2\nmodel.dim_time = 4\n\
         model.dim_embed = 4\nmodel.dim_out = 4\nmodel.num_neighbors = 4\n\
         train.max_epochs = 2\n",
    )
    .unwrap();
    let ckpt = dir.path().join("o.ckpt");
    let out = run(&[
        "train",
        "--data",
        csv.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "train.max_epochs=1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("epoch=1"), "{text}");
    assert!(!text.contains("epoch=2"), "override lost to file: {text}");
}
