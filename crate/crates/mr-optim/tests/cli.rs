//! End-to-end tests of the `mr-optim` binary: subcommands, artifacts, and
//! the exit-code contract (0 ok, 1 usage, 2 abort, 3 checker failure).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mr-optim"))
}

fn out_dir(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("mr-optim-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn spec_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/specs/noisy-blobs.json")
}

#[test]
fn illustrative_logistic_mr_writes_decreasing_trace() {
    let out = out_dir("logistic-mr");
    let output = run(&[
        "illustrative",
        "logistic-mr",
        "--epochs",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let csv = std::fs::read_to_string(out.join("logistic-mr.csv")).unwrap();
    let clean: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(clean.len(), 201);
    // Clean loss strictly decreasing from the first update on.
    assert!(clean.windows(2).skip(1).all(|w| w[1] < w[0]));
}

#[test]
fn illustrative_zero_epochs_is_single_row() {
    let out = out_dir("linear-zero");
    let output = run(&[
        "illustrative",
        "linear-mr-ls",
        "--epochs",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let csv = std::fs::read_to_string(out.join("linear-mr-ls.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus one row");
}

#[test]
fn illustrative_rejects_sigma_at_half() {
    let out = out_dir("bad-sigma");
    let output = run(&[
        "illustrative",
        "logistic-gd",
        "--sigma",
        "0.6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn train_bundled_spec_writes_artifacts() {
    let out = out_dir("train");
    let output = run(&[
        "train",
        "--spec",
        spec_path().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(output.status.success(), "{output:?}");
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with(
        "epoch,weighted_loss,clean_train_loss,test_acc,grad_norm,noisy_mass,eta,skipped_batches"
    ));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert!(parsed["final_test_accuracy"].as_f64().unwrap() > 0.0);
    assert_eq!(parsed["spec"]["seed"], 7);
}

#[test]
fn train_missing_spec_is_usage_error() {
    let out = out_dir("missing");
    let output = run(&[
        "train",
        "--spec",
        "/nonexistent/spec.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn train_bad_eta_names_the_field() {
    let out = out_dir("bad-eta");
    let bad = spec_path();
    let text = std::fs::read_to_string(bad).unwrap().replace("\"eta\": 0.01", "\"eta\": 0.0");
    let bad_path = out.join("bad.json");
    std::fs::write(&bad_path, text).unwrap();
    let output = run(&[
        "train",
        "--spec",
        bad_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("eta"), "stderr: {err}");
}

#[test]
fn train_divergence_uses_abort_exit_code() {
    let out = out_dir("abort");
    let text = std::fs::read_to_string(spec_path())
        .unwrap()
        .replace("\"alpha\": 0.1", "\"alpha\": 1e308");
    let path = out.join("diverge.json");
    std::fs::write(&path, text).unwrap();
    let output = run(&[
        "train",
        "--spec",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("epoch"), "stderr: {err}");
}

#[test]
fn check_descent_and_bounded_p_pass() {
    let output = run(&["check", "descent", "--instances", "5"]);
    assert!(output.status.success(), "{output:?}");
    let text = stdout(&output);
    assert_eq!(text.matches("PASS").count(), 5);

    let output = run(&["check", "bounded-p", "--epochs", "300"]);
    assert!(output.status.success(), "{output:?}");
    assert!(stdout(&output).contains("PASS"));

    let output = run(&["check", "thm2", "--seeds", "10"]);
    assert!(output.status.success(), "{output:?}");
}

#[test]
fn grid_dedups_and_writes_table() {
    let out = out_dir("grid");
    let output = run(&[
        "grid",
        "--spec",
        spec_path().to_str().unwrap(),
        "--etas",
        "0.1,0.01,0.01",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(output.status.success(), "{output:?}");
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("duplicate"), "stderr: {err}");
    let table = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(table.lines().count(), 3, "header plus two rows: {table}");
    assert!(stdout(&output).contains("selected eta"));
}

#[test]
fn grid_without_candidates_is_usage_error() {
    let out = out_dir("grid-empty");
    let output = run(&[
        "grid",
        "--spec",
        spec_path().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let out_a = out_dir("repro-a");
    let out_b = out_dir("repro-b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "illustrative",
            "linear-mr-ls",
            "--epochs",
            "100",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    let a = std::fs::read(out_a.join("linear-mr-ls.csv")).unwrap();
    let b = std::fs::read(out_b.join("linear-mr-ls.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn help_exits_zero() {
    let output = run(&["--help"]);
    assert!(output.status.success());
    let output = run(&["no-such-command"]);
    assert_eq!(output.status.code(), Some(1));
}
