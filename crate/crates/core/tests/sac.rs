use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spn_core::models::{Actor, ActorKind, CriticKind, Critics};
use spn_core::nn::{AdamConfig, Tensor};
use spn_core::oracle::gradcheck::{random_state, small_config, to_batch};
use spn_core::oracle::reference::{self, RefState};
use spn_core::sac::{
    pid_warmup_action, ReplayBuffer, SacAgent, SacHyper, TrainConfig, Trainer, Transition,
};
use spn_core::sensing::{decode_point, GoalVelocityState, ObstaclePointSet, Observation};
use spn_core::world::{Episode, EpisodeStatus, Pose, RobotState, Scenario, Vec2};

fn observation(s: &RefState) -> Observation {
    let (angles, distances) = s.points.iter().map(|&p| decode_point(p)).unzip();
    let set = ObstaclePointSet { points: s.points.clone(), angles, distances };
    Observation::from_parts(&set, &s.downsampled, GoalVelocityState::from_array(s.goal))
}

/// States rounded through the replay's single-precision storage.
fn stored(s: &RefState) -> RefState {
    let o = observation(s);
    RefState {
        points: o.points.iter().map(|p| [p[0] as f64, p[1] as f64]).collect(),
        downsampled: o.downsampled.iter().map(|&v| v as f64).collect(),
        goal: s.goal,
    }
}

fn batch(rng: &mut ChaCha8Rng, n: usize, terminal: bool) -> (Vec<Transition>, Vec<RefState>) {
    let mut out = Vec::new();
    let mut states = Vec::new();
    for i in 0..n {
        let s = random_state(rng, 5 + i, 6);
        let s2 = random_state(rng, 7 + i, 6);
        out.push(Transition {
            state: Arc::new(observation(&s)),
            raw_action: [0.0, 0.0],
            action: [0.1 + 0.05 * i as f64, -0.3 + 0.2 * i as f64],
            reward: -1.0 + 0.7 * i as f64,
            next_state: Arc::new(observation(&s2)),
            terminal,
        });
        states.push(stored(&s));
    }
    (out, states)
}

fn agent(critic: CriticKind, hyper: SacHyper, seed: u64) -> SacAgent<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = Actor::new(ActorKind::Spn, small_config(), &mut rng).unwrap();
    let critics = Critics::new(critic, small_config(), &mut rng).unwrap();
    SacAgent::new(actor, critics, AdamConfig::default(), hyper)
}

fn critic_q(critics: &Critics<f64>, states: &[RefState], actions: &[[f64; 2]]) -> [Vec<f64>; 3] {
    let a: Vec<f64> = actions.iter().flatten().copied().collect();
    let out = critics.evaluate(&to_batch(states), &Tensor::from_f64(actions.len(), 2, &a).unwrap()).unwrap();
    out.map(|t| t.to_f64_vec())
}

fn mse(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

#[test]
fn terminal_and_undiscounted_targets_are_the_reward() {
    for (gamma, terminal) in [(0.0, false), (0.99, true)] {
        for critic in [CriticKind::Spn, CriticKind::SpnV2] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let (transitions, states) = batch(&mut rng, 4, terminal);
            let mut a = agent(critic, SacHyper { gamma, ..SacHyper::default() }, 2);
            let actions: Vec<[f64; 2]> = transitions.iter().map(|t| t.action).collect();
            let [_, q1, q2] = critic_q(&a.critics, &states, &actions);
            let rewards: Vec<f64> = transitions.iter().map(|t| t.reward).collect();
            let refs: Vec<&Transition> = transitions.iter().collect();
            let report = a.update(&refs, &mut rng).unwrap();
            assert!((report.q1_loss - mse(&q1, &rewards)).abs() < 1e-10);
            assert!((report.q2_loss - mse(&q2, &rewards)).abs() < 1e-10);
        }
    }
}

#[test]
fn entropy_free_policy_loss_is_negative_min_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (transitions, states) = batch(&mut rng, 3, false);
    let mut a = agent(CriticKind::SpnV2, SacHyper { alpha: 0.0, ..SacHyper::default() }, 6);
    let eps = [[0.3, -1.1], [-0.4, 0.2], [1.5, 0.0]];
    let actions: Vec<[f64; 2]> = states
        .iter()
        .zip(&eps)
        .map(|(s, e)| {
            let (mean, log_std, _) = reference::actor_stats(&a.actor, s);
            reference::squashed_sample(mean, log_std, *e).0
        })
        .collect();
    let [_, q1, q2] = critic_q(&a.critics, &states, &actions);
    let want = -q1.iter().zip(&q2).map(|(x, y)| x.min(*y)).sum::<f64>() / 3.0;
    let refs: Vec<&Transition> = transitions.iter().collect();
    let noise = Tensor::from_f64(3, 2, &eps.concat()).unwrap();
    let report = a.update_with_noise(&refs, noise).unwrap();
    assert!((report.policy_loss - want).abs() < 1e-10);
}

#[test]
fn target_gap_shrinks_geometrically() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut critics = Critics::<f64>::new(CriticKind::Spn, small_config(), &mut rng).unwrap();
    assert_eq!(critics.target_gap(), 0.0);
    for p in critics.params.iter_mut() {
        p.value = p.value.map(|x| x + 0.1);
    }
    let mut gap = critics.target_gap();
    for _ in 0..50 {
        critics.sync_target(0.005);
        let next = critics.target_gap();
        assert!(next < gap);
        assert!((next - gap * 0.995f64.powi(2)).abs() <= 1e-9 * gap);
        gap = next;
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (transitions, _) = batch(&mut rng, 1, false);
    let mut buf = ReplayBuffer::new(10).unwrap();
    for i in 0..25 {
        let mut t = transitions[0].clone();
        t.reward = i as f64;
        buf.push(t);
    }
    let mut counts = [0usize; 10];
    let draws = 100_000;
    for i in buf.sample_indices(draws, &mut rng).unwrap() {
        counts[i] += 1;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 9 degrees of freedom
    assert!(chi2 < 27.88, "chi2 = {chi2}");
    let kept: Vec<f64> = buf.iter().map(|t| t.reward).collect();
    assert_eq!(kept, (15..25).map(|i| i as f64).collect::<Vec<_>>());
}

#[test]
fn warmup_controller_reaches_goals_in_open_space() {
    let room = Scenario::empty_room("open", 10.0, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let bearing: f64 = rand::Rng::random_range(&mut rng, -std::f64::consts::PI..std::f64::consts::PI);
        let heading: f64 = rand::Rng::random_range(&mut rng, -std::f64::consts::PI..std::f64::consts::PI);
        let start = Vec2::new(5.0, 5.0);
        let goal = Vec2::new(5.0 + 3.0 * bearing.cos(), 5.0 + 3.0 * bearing.sin());
        let mut ep = Episode::new(&room, RobotState::at(Pose::new(start.x, start.y, heading)), goal);
        while !ep.is_done() {
            let g = GoalVelocityState::of(ep.robot(), ep.goal());
            ep.step(pid_warmup_action(&g));
        }
        assert_eq!(ep.outcome().unwrap().status, EpisodeStatus::Success);
    }
}

fn tiny_run(seed: u64) -> Trainer<f64> {
    let cfg = TrainConfig {
        total_steps: 700,
        min_replay: 200,
        batch_size: 8,
        warmup_episodes: 1,
        eval_interval: 350,
        heldout_interval: 0,
        model: small_config(),
        ..TrainConfig::default()
    };
    let room = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/simple_room.json")).unwrap();
    let mut t = Trainer::<f64>::new(cfg, vec![room], Vec::new(), seed).unwrap();
    t.run().unwrap();
    t
}

#[test]
fn fixed_seed_training_is_reproducible() {
    let (a, b) = (tiny_run(4), tiny_run(4));
    assert_eq!(a.step(), 700);
    assert_eq!(a.agent.updates, 501);
    assert_eq!(a.metrics(), b.metrics());
    assert_eq!(a.metrics().len(), 2);
    for (x, y) in a.agent.actor.params.iter().zip(b.agent.actor.params.iter()) {
        assert_eq!(x.value, y.value);
    }
    let c = tiny_run(5);
    assert_ne!(a.agent.actor.params.iter().next().unwrap().value, c.agent.actor.params.iter().next().unwrap().value);
}

#[test]
fn checkpoint_resume_continues_counters() {
    let dir = tempfile::tempdir().unwrap();
    let room = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/simple_room.json")).unwrap();
    let mut cfg = TrainConfig {
        total_steps: 300,
        min_replay: 100,
        batch_size: 4,
        warmup_episodes: 0,
        eval_interval: 0,
        heldout_interval: 0,
        model: small_config(),
        ..TrainConfig::default()
    };
    let mut t = Trainer::<f64>::new(cfg.clone(), vec![room.clone()], Vec::new(), 1).unwrap().with_output(dir.path()).unwrap();
    t.run().unwrap();
    t.save_checkpoint(dir.path()).unwrap();
    let actor = t.agent.actor.params.clone();
    cfg.total_steps = 400;
    let mut r = Trainer::<f64>::resume(cfg, vec![room], Vec::new(), dir.path()).unwrap();
    assert_eq!(r.step(), 300);
    assert_eq!(r.agent.updates, t.agent.updates);
    for (x, y) in r.agent.actor.params.iter().zip(actor.iter()) {
        assert_eq!(x.value, y.value);
    }
    r.run().unwrap();
    assert_eq!(r.step(), 400);
}
