use std::path::Path;
use std::process::Command;

use offload_core::harness::{digest_hex, RunManifest};

fn offload(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_offload"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = offload(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn digest(path: &Path) -> String {
    digest_hex(&std::fs::read(path).unwrap())
}

#[test]
fn generate_is_deterministic_and_line_counted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate", "--count", "300", "--seed", "9", "--out", "a.txt",
        ],
    );
    ok(
        d,
        &[
            "generate",
            "--count",
            "300",
            "--seed",
            "9",
            "--out",
            "b.txt",
            "--workers",
            "1",
        ],
    );
    assert_eq!(digest(&d.join("a.txt")), digest(&d.join("b.txt")));
    let text = std::fs::read_to_string(d.join("a.txt")).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert!(text.starts_with("offload-instance v1\n"));
}

#[test]
fn unwritable_output_fails_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = offload(
        dir.path(),
        &["generate", "--count", "2", "--out", "missing/dir/x.txt"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing/dir/x.txt"));
}

#[test]
fn malformed_instance_line_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--count", "3", "--out", "i.txt"]);
    let mut text = std::fs::read_to_string(d.join("i.txt")).unwrap();
    text.push_str("garbage\n");
    std::fs::write(d.join("i.txt"), text).unwrap();
    let out = offload(d, &["label", "i.txt", "--out", "l.txt"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":5:"));
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "n_vehicles = \"two\"\n").unwrap();
    let out = offload(d, &["--config", "c.toml", "split-plan"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn label_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = offload_core::config::DEFAULT_CONFIG.replace("epochs = 200", "epochs = 3");
    std::fs::write(d.join("c.toml"), cfg).unwrap();
    ok(d, &["generate", "--count", "400", "--out", "i.txt"]);
    ok(d, &["label", "i.txt", "--out", "l.txt"]);
    ok(
        d,
        &[
            "label",
            "i.txt",
            "--solver",
            "sbb",
            "--max-nodes",
            "64",
            "--out",
            "s.txt",
        ],
    );
    assert_eq!(digest(&d.join("l.txt")), digest(&d.join("s.txt")));
    ok(
        d,
        &[
            "--config", "c.toml", "train", "l.txt", "--out", "m.bin", "--log", "log.csv",
        ],
    );
    ok(
        d,
        &["--config", "c.toml", "train", "l.txt", "--out", "m2.bin"],
    );
    assert_eq!(digest(&d.join("m.bin")), digest(&d.join("m2.bin")));
    let log = std::fs::read_to_string(d.join("log.csv")).unwrap();
    assert!(log.starts_with("epoch,loss,ce_term,mse_term\n"));
    assert_eq!(log.lines().count(), 4);
    ok(d, &["eval", "m.bin", "l.txt", "--out", "e.csv"]);
    let eval = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert!(eval.starts_with("accuracy,mse,seconds_per_instance\n"));
}

#[test]
fn experiment_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["experiment", "fig6-eta", "--out", "run"]);
    ok(
        d,
        &[
            "experiment",
            "--replay",
            "run/fig6.manifest.json",
            "--out",
            "again",
        ],
    );
    assert_eq!(
        digest(&d.join("run/fig6.csv")),
        digest(&d.join("again/fig6.csv"))
    );
    let m = RunManifest::load(&d.join("run/fig6.manifest.json")).unwrap();
    assert_eq!(m.outputs.len(), 2);
    assert_eq!(m.outputs[0].sha256, digest(&d.join("run/fig6.csv")));
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = offload(dir.path(), &["experiment", "fig9", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}
