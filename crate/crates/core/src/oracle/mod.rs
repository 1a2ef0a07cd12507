//! Brute-force cross-checks of the fast code paths.
//!
//! Each suite draws random instances from a fixed seed, runs both the
//! production routine and an independent slow reference, and reports the
//! largest discrepancy against its tolerance.

pub mod gradcheck;
pub mod reference;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::parse_lidar_label;
use crate::models::{Actor, ActorKind, CriticKind, Critics, ModelConfig};
use crate::nn::{matmul_t, AdamConfig, Tensor};
use crate::oracle::gradcheck::{check_instance, to_batch, Family};
use crate::oracle::reference::RefState;
use crate::sac::{SacAgent, SacHyper, Transition};
use crate::sensing::{
    min_downsample, pad_scan_for_fcnet, raycast_scan, robot_frame_polar, sensor_pose, GoalVelocityState, LidarConfig,
    Mount, Observation, D_MIN,
};
use crate::world::{sample_task, wrap_angle, Scenario, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed discrepancy (suite-specific units).
    pub metric: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &str, metric: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: metric <= tolerance, metric, tolerance, detail: detail.into() }
    }
}

fn rect(x0: f64, y0: f64, w: f64, h: f64, angle: f64) -> Vec<Vec2> {
    let (c, s) = (x0 + 0.5 * w, y0 + 0.5 * h);
    let (sn, cs) = angle.sin_cos();
    [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
        .iter()
        .map(|&(u, v)| {
            let (dx, dy) = (u * w, v * h);
            Vec2::new(c + cs * dx - sn * dy, s + sn * dx + cs * dy)
        })
        .collect()
}

/// Room of random size with a few random boxes and triangles.
pub fn random_scenario(rng: &mut impl Rng) -> Scenario {
    let (w, h) = (rng.random_range(4.0..12.0), rng.random_range(4.0..12.0));
    let mut obstacles = Vec::new();
    for _ in 0..rng.random_range(0..7) {
        let (x, y) = (rng.random_range(0.5..w - 1.0), rng.random_range(0.5..h - 1.0));
        if rng.random_bool(0.7) {
            let angle = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..3.2) };
            obstacles.push(rect(x, y, rng.random_range(0.2..1.5), rng.random_range(0.2..1.5), angle));
        } else {
            let r = rng.random_range(0.2..0.8);
            let a0: f64 = rng.random_range(0.0..6.3);
            obstacles.push((0..3).map(|k| Vec2::new(x + r * (a0 + 2.1 * k as f64).cos(), y + r * (a0 + 2.1 * k as f64).sin())).collect());
        }
    }
    Scenario::new("random", [0.0, 0.0, w, h], obstacles).expect("random scenario is valid")
}

/// A preset sensor or a random one with an offset, rotated mount.
pub fn random_lidar(rng: &mut impl Rng) -> LidarConfig {
    if rng.random_bool(0.5) {
        let labels: Vec<&str> = crate::eval::preset_labels().collect();
        return parse_lidar_label(labels[rng.random_range(0..labels.len())]).expect("preset");
    }
    let fov = if rng.random_bool(0.3) { 360.0 } else { rng.random_range(60.0..350.0) };
    let res = rng.random_range(0.2..12.0);
    let mount = Mount { x: rng.random_range(-0.1..0.1), y: rng.random_range(-0.15..0.15), phi: rng.random_range(-0.5..0.5) };
    LidarConfig::new(fov, res, rng.random_range(2.0..30.0), mount).expect("random lidar is valid")
}

/// Window minima against explicit loops on random 1080-beam scans (exact).
pub fn downsample_suite(scans: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for _ in 0..scans {
        let d: Vec<f64> = (0..1080)
            .map(|_| if rng.random_bool(0.05) { D_MIN } else { rng.random_range(D_MIN..30.0) })
            .collect();
        let fast = min_downsample(&d, 36, 30).expect("valid layout");
        let slow = reference::brute_window_min(&d, 36, 30);
        mismatches += fast.iter().zip(&slow).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    }
    SuiteResult::new("min_downsample", mismatches as f64, 0.0, format!("{scans} scans, {mismatches} differing windows"))
}

/// Analytic ray casting against 1 mm ray marching.
pub fn raycast_suite(beams: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_scan = 10;
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let mut done = 0;
    while done < beams {
        let scenario = random_scenario(&mut rng);
        for _ in 0..10 {
            let cfg = random_lidar(&mut rng);
            let Ok((robot, _)) = sample_task(&scenario, &mut rng) else { break };
            let scan = raycast_scan(&scenario, &robot.pose, &cfg);
            let sensor = sensor_pose(&robot.pose, &cfg);
            for _ in 0..per_scan.min(beams - done) {
                let i = rng.random_range(0..scan.len());
                let oracle = reference::raymarch(&scenario, sensor.position(), sensor.theta + scan.beam_angles[i], cfg.max_range, 1e-3)
                    .max(D_MIN);
                let err = (scan.distances[i] - oracle).abs();
                if err > worst {
                    worst = err;
                    detail = format!("beam {i} at ({:.3}, {:.3}): {} vs {}", sensor.x, sensor.y, scan.distances[i], oracle);
                }
                done += 1;
            }
            if done >= beams {
                break;
            }
        }
    }
    SuiteResult::new("raycast", worst, 2e-3, format!("{beams} beams; worst {detail}"))
}

/// Canonical resampling against an exhaustive nearest-angle search (exact).
pub fn padding_suite(cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canonical = LidarConfig::canonical();
    let targets: Vec<f64> = canonical.beam_angles().iter().map(|&b| wrap_angle(b + canonical.mount.phi)).collect();
    let mut mismatches = 0usize;
    for _ in 0..cases {
        let cfg = random_lidar(&mut rng);
        let n = cfg.beam_count();
        let scan = crate::sensing::Scan {
            distances: (0..n).map(|_| rng.random_range(D_MIN..cfg.max_range)).collect(),
            beam_angles: cfg.beam_angles(),
            blocked: false,
        };
        let fast = pad_scan_for_fcnet(&scan, &cfg, &canonical);
        let (angles, distances) = robot_frame_polar(&scan, &cfg);
        let tol = 0.5 * (cfg.resolution_deg + canonical.resolution_deg).to_radians();
        let slow = reference::nearest_angle_exhaustive(&angles, &distances, &targets, tol, canonical.max_range, canonical.max_range);
        mismatches += fast.iter().zip(&slow).filter(|(a, b)| a != b).count();
    }
    SuiteResult::new("fcnet_padding", mismatches as f64, 0.0, format!("{cases} scans, {mismatches} differing beams"))
}

/// Exact clearance against dense edge sampling.
pub fn clearance_suite(points: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 4000;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < points {
        let scenario = random_scenario(&mut rng);
        for _ in 0..20 {
            let p = Vec2::new(rng.random_range(scenario.min.x..scenario.max.x), rng.random_range(scenario.min.y..scenario.max.y));
            if scenario.is_occupied(p) {
                continue;
            }
            let exact = scenario.clearance(p);
            let sampled = reference::sampled_clearance(&scenario, p, samples);
            // sampling can only overestimate, by at most half a sample spacing
            let spacing = scenario.width().max(scenario.height()) / samples as f64;
            let excess = if sampled + 1e-12 < exact { f64::INFINITY } else { (sampled - exact) / spacing };
            worst = worst.max(excess);
            checked += 1;
        }
    }
    SuiteResult::new("clearance", worst, 0.5, format!("{points} points; excess in sample spacings"))
}

/// Blocked matrix products against triple loops (relative error).
pub fn gemm_suite(cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (m, k, n) = (rng.random_range(1..70), rng.random_range(1..70), rng.random_range(1..70));
        let (ta, tb) = (rng.random_bool(0.5), rng.random_bool(0.5));
        let a: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = reference::naive_matmul(&a, &b, m, k, n);
        let transpose = |x: &[f64], r: usize, c: usize| -> Vec<f64> {
            (0..c).flat_map(|j| (0..r).map(move |i| x[i * c + j])).collect()
        };
        let at = if ta { Tensor::from_vec(k, m, transpose(&a, m, k)).unwrap() } else { Tensor::from_vec(m, k, a.clone()).unwrap() };
        let bt = if tb { Tensor::from_vec(n, k, transpose(&b, k, n)).unwrap() } else { Tensor::from_vec(k, n, b.clone()).unwrap() };
        let got = matmul_t(&at, ta, &bt, tb).expect("shapes agree");
        for (x, y) in got.data().iter().zip(&want) {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    SuiteResult::new("gemm", worst, 1e-12, format!("{cases} random products"))
}

/// Tape forward passes of every network against loop implementations.
pub fn forward_suite(cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig { k: 6, h: 16, head: vec![12, 12], fc_hidden: vec![12, 12], downsample_m: 8 };
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let states: Vec<RefState> = (0..3).map(|_| {
            let n = rng.random_range(1..60);
            gradcheck::random_state(&mut rng, n, cfg.downsample_m)
        }).collect();
        let batch = to_batch(&states);
        for kind in [ActorKind::Spn, ActorKind::FcNet, ActorKind::PointNet] {
            let actor = Actor::<f64>::new(kind, cfg.clone(), &mut rng).unwrap();
            for (s, out) in states.iter().zip(actor.infer(&batch).unwrap()) {
                let (mean, log_std, support) = reference::actor_stats(&actor, s);
                worst = worst.max((0..2).map(|j| (mean[j] - out.mean[j]).abs().max((log_std[j] - out.log_std[j]).abs())).fold(0.0, f64::max));
                if support != out.support_indices {
                    worst = f64::INFINITY;
                }
            }
        }
        for kind in [CriticKind::Spn, CriticKind::SpnV2] {
            let critics = Critics::<f64>::new(kind, cfg.clone(), &mut rng).unwrap();
            let actions: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at = Tensor::from_vec(3, 2, actions.clone()).unwrap();
            let [v, q1, q2] = critics.evaluate(&batch, &at).unwrap();
            let tv = critics.target_value(&batch).unwrap();
            for (i, s) in states.iter().enumerate() {
                let (rv, r1, r2) = reference::critic_values(&critics, s, [actions[2 * i], actions[2 * i + 1]]);
                let rt = reference::target_value(&critics, s);
                for (a, b) in [(v.get(i, 0), rv), (q1.get(i, 0), r1), (q2.get(i, 0), r2), (tv.get(i, 0), rt)] {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    SuiteResult::new("network_forward", worst, 1e-10, format!("{cases} batches x 5 networks"))
}

/// Finite-difference gradients of every network family.
pub fn gradient_suite(instances: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let mut checked = 0;
    for family in Family::ALL {
        for _ in 0..instances {
            let r = check_instance(family, &mut rng, 1e-5);
            checked += r.checked;
            if r.max_rel_error > worst {
                worst = r.max_rel_error;
                detail = format!("{}: {}", family.name(), r.worst);
            }
        }
    }
    SuiteResult::new("gradients", worst, 1e-3, format!("{checked} partials; worst {detail}"))
}

fn permuted(s: &RefState, rng: &mut impl Rng) -> RefState {
    let mut out = s.clone();
    out.points.shuffle(rng);
    out
}

/// Outputs under random reorderings of the point set.
pub fn permutation_suite(triples: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..triples {
        let n = rng.random_range(2..120);
        let s = gradcheck::random_state(&mut rng, n, cfg.downsample_m);
        let p = permuted(&s, &mut rng);
        let (b0, b1) = (to_batch(std::slice::from_ref(&s)), to_batch(std::slice::from_ref(&p)));
        let actor = Actor::<f64>::new(ActorKind::Spn, cfg.clone(), &mut rng).unwrap();
        let (o0, o1) = (actor.infer_one(&b0).unwrap(), actor.infer_one(&b1).unwrap());
        for j in 0..2 {
            worst = worst.max((o0.mean[j] - o1.mean[j]).abs()).max((o0.log_std[j] - o1.log_std[j]).abs());
        }
        let critics = Critics::<f64>::new(CriticKind::SpnV2, cfg.clone(), &mut rng).unwrap();
        let a = Tensor::from_vec(1, 2, vec![rng.random_range(0.0..0.5), rng.random_range(-1.5..1.5)]).unwrap();
        let (c0, c1) = (critics.evaluate(&b0, &a).unwrap(), critics.evaluate(&b1, &a).unwrap());
        for (x, y) in c0.iter().zip(&c1) {
            worst = worst.max((x.item() - y.item()).abs());
        }
    }
    SuiteResult::new("permutation_invariance", worst, 1e-12, format!("{triples} (params, set, permutation) triples"))
}

fn observation(s: &RefState) -> Observation {
    Observation {
        points: s.points.iter().map(|p| [p[0] as f32, p[1] as f32]).collect(),
        downsampled: s.downsampled.iter().map(|&v| v as f32).collect(),
        goal: GoalVelocityState::from_array(s.goal),
    }
}

/// Full-precision view of what the networks see for an observation.
pub fn ref_state(o: &Observation) -> RefState {
    RefState {
        points: o.points.iter().map(|p| [p[0] as f64, p[1] as f64]).collect(),
        downsampled: o.downsampled.iter().map(|&v| v as f64).collect(),
        goal: o.goal.to_array(),
    }
}

/// One SAC update on tiny networks against a hand computation of the three
/// losses and of the target smoothing.
pub fn sac_step_suite(seed: u64) -> SuiteResult {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (c, critic) in [CriticKind::Spn, CriticKind::SpnV2].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + c as u64);
        let cfg = ModelConfig { k: 3, h: 4, head: vec![5], fc_hidden: vec![5], downsample_m: 4 };
        let hyper = SacHyper { gamma: 0.9, alpha: 0.3, tau: 0.1 };
        let actor = Actor::<f64>::new(ActorKind::Spn, cfg.clone(), &mut rng).unwrap();
        let mut critics = Critics::<f64>::new(critic, cfg.clone(), &mut rng).unwrap();
        for p in critics.target.iter_mut() {
            for v in p.value.data_mut() {
                *v += rng.random_range(-0.2..0.2);
            }
        }
        let mut agent = SacAgent::new(actor, critics, AdamConfig::default(), hyper);
        let batch: Vec<Transition> = (0..3)
            .map(|i| Transition {
                state: Arc::new(observation(&gradcheck::random_state(&mut rng, 3 + i, 4))),
                raw_action: [0.0, 0.0],
                action: [rng.random_range(0.0..0.5), rng.random_range(-1.5..1.5)],
                reward: rng.random_range(-1.0..1.0),
                next_state: Arc::new(observation(&gradcheck::random_state(&mut rng, 5, 4))),
                terminal: i == 1,
            })
            .collect();
        let eps: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();

        let (mut q1l, mut q2l, mut vl, mut pl) = (0.0, 0.0, 0.0, 0.0);
        for (i, t) in batch.iter().enumerate() {
            let (s, s2) = (ref_state(&t.state), ref_state(&t.next_state));
            let y = t.reward + hyper.gamma * if t.terminal { 0.0 } else { reference::target_value(&agent.critics, &s2) };
            let (v, q1, q2) = reference::critic_values(&agent.critics, &s, t.action);
            let (mean, log_std, _) = reference::actor_stats(&agent.actor, &s);
            let (a, logp) = reference::squashed_sample(mean, log_std, [eps[2 * i], eps[2 * i + 1]]);
            let (_, q1n, q2n) = reference::critic_values(&agent.critics, &s, a);
            let qmin = q1n.min(q2n);
            q1l += (q1 - y).powi(2) / 3.0;
            q2l += (q2 - y).powi(2) / 3.0;
            vl += (v - (qmin - hyper.alpha * logp)).powi(2) / 3.0;
            pl += (hyper.alpha * logp - qmin) / 3.0;
        }
        let target_before = agent.critics.target.clone();
        let refs: Vec<&Transition> = batch.iter().collect();
        let report = agent.update_with_noise(&refs, Tensor::from_vec(3, 2, eps).unwrap()).unwrap();
        let loss_err = [(report.q1_loss, q1l), (report.q2_loss, q2l), (report.v_loss, vl), (report.policy_loss, pl)]
            .iter()
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let mut polyak_err = 0.0f64;
        for (new, old) in agent.critics.target.iter().zip(target_before.iter()) {
            let live = agent.critics.params.value(agent.critics.params.by_name(&new.name).unwrap());
            for ((&n, &o), &l) in new.value.data().iter().zip(old.value.data()).zip(live.data()) {
                polyak_err = polyak_err.max((n - (hyper.tau * l + (1.0 - hyper.tau) * o)).abs());
            }
        }
        worst = worst.max(loss_err).max(polyak_err);
        detail.push(format!("{}: losses {loss_err:.1e}, polyak {polyak_err:.1e}", critic.model_kind()));
    }
    SuiteResult::new("sac_step", worst, 1e-10, detail.join("; "))
}

/// Every suite at sizes that finish in well under a minute.
pub fn run_all() -> Vec<SuiteResult> {
    vec![
        downsample_suite(100, 1),
        raycast_suite(2000, 2),
        padding_suite(50, 3),
        clearance_suite(300, 4),
        gemm_suite(200, 5),
        forward_suite(20, 6),
        gradient_suite(3, 7),
        permutation_suite(100, 8),
        sac_step_suite(9),
    ]
}

