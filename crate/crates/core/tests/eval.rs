use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spn_core::eval::*;
use spn_core::models::{Actor, ActorKind, ModelConfig};
use spn_core::sensing::LidarConfig;
use spn_core::world::{EpisodeStatus, Pose, Scenario};

fn room() -> Scenario {
    Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/simple_room.json")).unwrap()
}

fn canonical() -> LidarConfig {
    parse_lidar_label("360|0.33|5|0").unwrap()
}

#[test]
fn teleport_stub_always_succeeds() {
    let run = run_eval(&Teleport, &room(), &canonical(), 20, 3, EvalOptions::default()).unwrap();
    let r = &run.report.scenarios[0];
    assert_eq!(r.success_rate, 1.0);
    assert!(run.episodes.iter().all(|e| e.steps == 1 && e.score == 1.0 - 2.0 / 400.0));
}

#[test]
fn zero_velocity_stub_always_times_out() {
    let run = run_eval(&ZeroVelocity, &room(), &canonical(), 10, 3, EvalOptions::default()).unwrap();
    let r = &run.report.scenarios[0];
    assert_eq!(r.timeout_rate, 1.0);
    assert_eq!(r.mean_score, -1.0);
    assert!(run.episodes.iter().all(|e| e.status == EpisodeStatus::Timeout && e.steps == 400));
}

#[test]
fn same_seed_same_report() {
    let actor = Actor::<f64>::new(ActorKind::Spn, ModelConfig { k: 5, ..ModelConfig::default() }, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let a = run_eval(&actor, &room(), &canonical(), 6, 9, EvalOptions::default()).unwrap();
    let b = run_eval(&actor, &room(), &canonical(), 6, 9, EvalOptions::default()).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    let c = run_eval(&actor, &room(), &canonical(), 6, 10, EvalOptions::default()).unwrap();
    assert_ne!(a.episodes.iter().map(|e| e.task).collect::<Vec<_>>(), c.episodes.iter().map(|e| e.task).collect::<Vec<_>>());
}

#[test]
fn sweep_produces_one_row_per_pair() {
    let lidars = [canonical(), parse_lidar_label("180|20|10|0").unwrap()];
    let scenarios = [room(), Scenario::empty_room("open", 6.0, 6.0)];
    let report = sweep(&GoalSeeker, &lidars, &scenarios, 3, 1).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert_eq!(report.rows[3].scenario, "open");
    assert_eq!(report.rows[3].label, "180|20|10|0");
    // open room: the obstacle-blind controller never fails
    assert_eq!(report.rows[2].success, 3);
}

#[test]
fn fcnet_accepts_every_sensor() {
    let actor = Actor::<f64>::new(ActorKind::FcNet, ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for label in preset_labels() {
        let run = run_eval(&actor, &room(), &parse_lidar_label(label).unwrap(), 1, 0, EvalOptions::default()).unwrap();
        assert_eq!(run.episodes.len(), 1, "{label}");
    }
}

#[test]
fn malformed_labels_are_rejected() {
    for bad in ["", "360|0.33|5", "360|x|5|0", "0|1|5|0", "360|0|5|0", "360|1|-5|0", "360|1|5|0|0"] {
        assert!(matches!(parse_lidar_label(bad), Err(EvalError::Label(_))), "{bad:?}");
    }
}

#[test]
fn preset_beam_counts() {
    assert_eq!(parse_lidar_label("360|0.33|5|0").unwrap().beam_count(), 1080);
    assert_eq!(parse_lidar_label("240|0.47|5.6|0").unwrap().beam_count(), 512);
    assert_eq!(parse_lidar_label("180|20|10|0").unwrap().beam_count(), 9);
    assert_eq!(parse_lidar_label("270|0.25|30|0").unwrap().beam_count(), 1080);
}

proptest! {
    #[test]
    fn labels_round_trip(fov in 1u32..=360, res in 1u32..2000, range in 1u32..500, y in -50i32..50) {
        let label = format!("{}|{}|{}|{}", fov, res as f64 / 100.0, range as f64 / 10.0, y as f64 / 100.0);
        if let Ok(cfg) = parse_lidar_label(&label) {
            prop_assert_eq!(format_lidar_label(&cfg), label.clone());
            prop_assert_eq!(parse_lidar_label(&format_lidar_label(&cfg)).unwrap(), cfg);
        }
    }
}

fn traced_episode() -> (SupportPointTrace, usize) {
    let actor = Actor::<f64>::new(ActorKind::Spn, ModelConfig { k: 5, ..ModelConfig::default() }, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let s = room();
    let tasks = eval_tasks(&s, 1, 4).unwrap();
    let builder = runner_builder(&actor);
    let rec = run_episode(&actor, &s, &builder, 0, &tasks[0], EvalOptions { trace_interval: Some(1) }).unwrap();
    (rec.trace.unwrap(), rec.steps)
}

fn runner_builder(actor: &Actor<f64>) -> spn_core::sensing::ObservationBuilder {
    spn_core::eval::runner::observation_builder(actor, &canonical()).unwrap()
}

#[test]
fn traces_record_every_step_with_full_multiplicity() {
    let (trace, steps) = traced_episode();
    assert_eq!(trace.records.len(), steps);
    assert_eq!(trace.path.len(), steps + 1);
    for r in &trace.records {
        assert_eq!(r.total_multiplicity(), 5);
        assert!(r.support.len() <= 5);
    }
}

#[test]
fn trace_csv_round_trip() {
    let (trace, _) = traced_episode();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_trace_csv(&trace, &path).unwrap();
    assert_eq!(read_trace_csv(&path).unwrap(), trace.records);
}

#[test]
fn single_record_exports() {
    let trace = SupportPointTrace {
        scenario: "simple room".into(),
        task_index: 7,
        k: 3,
        records: vec![TraceRecord {
            step: 0,
            pose: Pose::new(1.0, 1.5, 0.3),
            v: 0.0,
            omega: 0.0,
            goal: [6.0, 6.5],
            support: vec![SupportPoint { x: 0.1, y: 0.9, multiplicity: 2 }, SupportPoint { x: -0.4, y: 0.2, multiplicity: 1 }],
        }],
        path: vec![[1.0, 1.5, 0.3]],
        status: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let files = export_traces(std::slice::from_ref(&trace), &room(), dir.path()).unwrap();
    let csv = files.iter().find(|p| p.extension().unwrap() == "csv").unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("step,x,y,theta,v,omega,goal_x,goal_y,sp0_x,sp0_y,sp0_m,sp1_x"));
    let svg = std::fs::read_to_string(files.iter().find(|p| p.extension().unwrap() == "svg").unwrap()).unwrap();
    assert_eq!(svg.matches("class=\"robot\"").count(), 1);
    assert_eq!(svg.matches("class=\"support\"").count(), 2);
    assert_eq!(trace.file_stem(), "simple_room_task007");
}
