//! Exit codes, configuration handling and a small end-to-end run of the
//! `chansr` binary.

use std::path::Path;
use std::process::{Command, Output};

fn chansr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chansr")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = r#"
seed = 3
[scene.urban]
grid_x = 3
grid_y = 3
[routes]
routes = 8
[trace]
max_reflection_order = 1
[cluster]
slots = 4
[train]
epochs = 2
max_hidden = 16
[ablate]
max_hidden = [8, 16]
"#;

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nepoch = 3\n").unwrap();
    let out = chansr(&["--config", p(&cfg), "scene-gen", "--out", p(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = chansr(&[
        "trace",
        "--scene",
        p(&dir.path().join("nope.json")),
        "--routes",
        p(&dir.path().join("nope2.json")),
        "--out",
        p(&dir.path().join("s.jsonl")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn bad_arguments_are_rejected() {
    assert_eq!(code(&chansr(&["train"])), 2);
    assert_eq!(code(&chansr(&["no-such-stage"])), 2);
    assert_eq!(code(&chansr(&["--help"])), 0);
}

#[test]
fn small_pipeline_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let c = p(&cfg);
    let run = |args: &[&str]| {
        let mut full = vec!["--config", c];
        full.extend_from_slice(args);
        let out = chansr(&full);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    let (world, ds) = (d.join("world"), d.join("ds"));
    let (snaps, samples) = (d.join("snaps.jsonl"), d.join("samples.jsonl"));
    let (model, eval) = (d.join("x4.ckpt"), d.join("eval.csv"));
    run(&["scene-gen", "--out", p(&world)]);
    run(&["trace", "--scene", p(&world.join("scene.json")), "--routes", p(&world.join("routes.json")), "--out", p(&snaps)]);
    run(&["cluster", "--snapshots", p(&snaps), "--out", p(&samples)]);
    run(&["dataset", "--samples", p(&samples), "--out", p(&ds)]);
    run(&["train", "--dataset", p(&ds), "--scale", "4", "--out", p(&model)]);
    run(&["eval", "--dataset", p(&ds), "--model", p(&model), "--out", p(&eval)]);
    run(&["ablate", "--dataset", p(&ds), "--scale", "4", "--out", p(&d.join("ablate.csv"))]);
    run(&["cir", "--dataset", p(&ds), "--model", p(&model), "--snapshots", p(&snaps), "--out", p(&d.join("cir.csv"))]);
    run(&["report", "--eval", p(&eval), "--out", p(&d.join("report"))]);

    for f in ["x4.best.ckpt", "x4.history.csv", "cir.match.csv", "report/summary.md", "report/table_all.csv"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    for s in [2, 4, 8, 16] {
        assert!(ds.join(format!("manifest_x{s}.json")).exists());
    }
    let history = std::fs::read_to_string(d.join("x4.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2);
    let ablate = std::fs::read_to_string(d.join("ablate.csv")).unwrap();
    assert_eq!(ablate.lines().count(), 1 + 3);
}

#[test]
fn wrong_scale_for_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = chansr(&["train", "--dataset", p(dir.path()), "--scale", "3", "--out", p(&dir.path().join("m.ckpt"))]);
    assert_eq!(code(&out), 2);
}
