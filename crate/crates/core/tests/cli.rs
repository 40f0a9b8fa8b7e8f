mod common;

use std::path::Path;
use std::process::{Command, Output};

use ncsdf::dataset::{load_dataset, Layout, NormalFrame};
use ncsdf::train::{load_state, Trainer};

fn ncsdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncsdf"))
        .args(["--threads", "1"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ncsdf(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "ncsdf {args:?} failed: {stderr}");
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn smoke_pipeline_emits_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let renders = dir.path().join("renders");
    let mesh = dir.path().join("mesh.ply");

    let summary = ok(&[
        "synth", "--scene", "smoke-box", "--views", "3", "--resolution", "24", "--seed", "2", "--out", s(&data),
    ]);
    assert!(summary.trim_start().starts_with('{'));
    assert!(data.join("synth.json").exists());
    let ds = load_dataset(&data, NormalFrame::World, Layout::Canonical).unwrap();
    assert_eq!(ds.len(), 3);

    let mut cfg = common::tiny_config(20, 0, 32);
    cfg.checkpoint_every = 0;
    let cfg_path = dir.path().join("train.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()).unwrap();
    ok(&["train", "--data", s(&data), "--config", s(&cfg_path), "--out", s(&run), "--progress", "0"]);
    let model_path = run.join("model.bin");
    assert!(model_path.exists());
    assert!(run.join("config.toml").exists());
    assert!(run.join("train_log.csv").exists());
    let (saved_cfg, state) = load_state(&model_path).unwrap();
    assert_eq!(state.iteration, 20);
    // Without a second stage the compensation field never moves.
    let fresh = Trainer::new(saved_cfg, &ds).unwrap();
    assert_eq!(state.model.compensation, fresh.state.model.compensation);

    ok(&[
        "render", "--data", s(&data), "--checkpoint", s(&model_path), "--view", "1", "--stride", "2", "--out",
        s(&renders),
    ]);
    for kind in ["color", "normal_comp", "normal_sdf", "bias"] {
        assert!(renders.join(format!("view001_{kind}.png")).exists(), "{kind} panel missing");
    }

    ok(&[
        "mesh", "--checkpoint", s(&model_path), "--data", s(&data), "--resolution", "32", "--min-component", "0",
        "--out", s(&mesh),
    ]);
    assert!(mesh.exists());

    let report_path = dir.path().join("self.json");
    let csv = ok(&[
        "eval", "--mesh", s(&mesh), "--gt", s(&mesh), "--points", "10000", "--out", s(&report_path),
    ]);
    let mut lines = csv.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == "fscore").unwrap();
    let f: f64 = lines.next().unwrap().split(',').nth(col).unwrap().parse().unwrap();
    assert_eq!(f, 1.0, "identical meshes: {csv}");
    assert!(report_path.exists());

    let against_data = ok(&["eval", "--mesh", s(&mesh), "--data", s(&data), "--points", "10000"]);
    assert_eq!(against_data.lines().count(), 2);

    let bias_path = dir.path().join("bias.json");
    let maps = dir.path().join("maps");
    let bias = ok(&[
        "bias-report", "--data", s(&data), "--checkpoint", s(&model_path), "--stride", "4", "--out", s(&bias_path),
        "--sampler-maps", s(&maps),
    ]);
    assert!(bias.lines().last().unwrap().starts_with("all,"));
    assert!(bias_path.exists());
    for kind in ["intensity", "mask_high", "mask_low"] {
        assert!(maps.join(format!("view002_{kind}.png")).exists(), "{kind} map missing");
    }
}

#[test]
fn stage_two_alone_needs_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--scene", "smoke-box", "--views", "2", "--resolution", "16", "--out", s(&data)]);
    let out = ncsdf(&["train", "--data", s(&data), "--out", s(&dir.path().join("run")), "--stage", "2"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"error\""), "{err}");
}

#[test]
fn bad_flags_and_missing_inputs_exit_nonzero_with_json() {
    let out = ncsdf(&["synth", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = ncsdf(&["train", "--data", s(&dir.path().join("missing")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    let line: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(line["code"], 3);

    let out = ncsdf(&["--help"]);
    assert!(out.status.success());
}
