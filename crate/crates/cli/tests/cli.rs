use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use serde_json::Value;
use spn_core::models::{ActorKind, ModelConfig};
use spn_core::Actor64;

fn spn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spn")).args(args).output().expect("binary runs")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn error_line(out: &Output) -> Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let last = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("{last:?}: {e}"))
}

fn write_model(dir: &Path) -> PathBuf {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let cfg = ModelConfig { k: 5, h: 16, head: vec![16, 16], ..ModelConfig::default() };
    let actor = Actor64::new(ActorKind::Spn, cfg, &mut rng).unwrap();
    let path = dir.join("actor.spnw");
    actor.save(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn missing_model_file_names_the_flag() {
    let scen = scenarios().join("simple_room.json");
    let out = spn(&["eval", "--model", "/nonexistent/actor.spnw", "--scenario", scen.to_str().unwrap()]);
    let err = error_line(&out);
    assert_eq!(err["flag"], "--model");
    assert!(err["error"].as_str().unwrap().contains("/nonexistent/actor.spnw"));
}

#[test]
fn omitted_required_flag_is_reported() {
    let err = error_line(&spn(&["eval", "--scenario", "x.json"]));
    assert_eq!(err["flag"], "--model");
}

#[test]
fn bad_lidar_label_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let scen = scenarios().join("simple_room.json");
    let out = spn(&["eval", "--model", model.to_str().unwrap(), "--scenario", scen.to_str().unwrap(), "--lidar", "360|0.33"]);
    assert_eq!(error_line(&out)["flag"], "--lidar");
}

#[test]
fn eval_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let report = dir.path().join("out/report.json");
    let scen = scenarios().join("simple_room.json");
    let out = spn(&[
        "eval", "--model", model.to_str().unwrap(), "--scenario", scen.to_str().unwrap(),
        "--lidar", "270|0.25|30|0", "--tasks", "3", "--seed", "2", "--report", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["label"], "270|0.25|30|0");
    assert_eq!(v["scenarios"][0]["n_tasks"], 3);
}

#[test]
fn sweep_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let worlds = dir.path().join("worlds");
    std::fs::create_dir(&worlds).unwrap();
    for f in ["simple_room.json", "heldout/env6.json"] {
        let src = scenarios().join(f);
        std::fs::copy(&src, worlds.join(src.file_name().unwrap())).unwrap();
    }
    let out = spn(&[
        "sweep", "--model", model.to_str().unwrap(), "--lidars", "360|0.33|5|0,180|20|10|0",
        "--scenarios", worlds.to_str().unwrap(), "--tasks", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn viz_exports_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let scen = scenarios().join("simple_room.json");
    let traces = dir.path().join("traces");
    let out = spn(&[
        "viz", "--model", model.to_str().unwrap(), "--scenario", scen.to_str().unwrap(),
        "--goal", "6.5,1.5", "--start", "1,1,0", "--trace-out", traces.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = std::fs::read_dir(&traces).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().any(|n| n.ends_with(".csv")));
    assert!(names.iter().any(|n| n.ends_with(".svg")));
}

#[test]
fn bad_goal_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let scen = scenarios().join("simple_room.json");
    let out = spn(&[
        "viz", "--model", model.to_str().unwrap(), "--scenario", scen.to_str().unwrap(),
        "--goal", "6.5", "--trace-out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(error_line(&out)["flag"], "--goal");
}

#[test]
fn train_smoke_and_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.toml");
    let room = scenarios().join("simple_room.json");
    std::fs::write(
        &cfg,
        format!(
            "total_steps = 120\nmin_replay = 50\nbatch_size = 4\nwarmup_episodes = 0\neval_interval = 60\nheldout_interval = 0\n\
             precision = \"f32\"\nscenarios = [{room:?}]\n[model]\nK = 3\nH = 4\nhead = [8]\nfc_hidden = [8]\n"
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = spn(&["train", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("actor.spnw").is_file());
    let metrics = std::fs::read_to_string(out_dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);

    std::fs::write(&cfg, "total_stepz = 5\n").unwrap();
    let out = spn(&["train", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(error_line(&out)["flag"], "--config");
}

#[test]
fn oracle_check_passes() {
    let out = spn(&["oracle-check"]);
    assert!(out.status.success(), "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 9);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
