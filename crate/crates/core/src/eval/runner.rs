use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::label::format_lidar_label;
use crate::eval::policy::{Control, EvalPolicy};
use crate::eval::score::score_of;
use crate::eval::trace::{SupportPoint, SupportPointTrace, TraceRecord};
use crate::eval::EvalError;
use crate::sensing::{LidarConfig, Observation, ObservationBuilder};
use crate::world::{sample_tasks, Episode, EpisodeStatus, EvalTask, Pose, Scenario};

/// Default spacing of support-point records, in control steps.
pub const TRACE_INTERVAL: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Record support points every this many steps.
    pub trace_interval: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub task_index: usize,
    pub task: EvalTask,
    pub status: EpisodeStatus,
    pub steps: usize,
    pub score: f64,
    pub trace: Option<SupportPointTrace>,
}

/// Aggregate over one scenario and one sensor setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub label: String,
    pub n_tasks: usize,
    pub success: usize,
    pub crash: usize,
    pub timeout: usize,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_score: f64,
    pub mean_steps: f64,
}

impl ScenarioReport {
    pub fn aggregate(scenario: &str, label: &str, episodes: &[EpisodeRecord]) -> Self {
        let n = episodes.len();
        let count = |s: EpisodeStatus| episodes.iter().filter(|e| e.status == s).count();
        let (success, crash, timeout) =
            (count(EpisodeStatus::Success), count(EpisodeStatus::Crash), count(EpisodeStatus::Timeout));
        let denom = n.max(1) as f64;
        Self {
            scenario: scenario.to_string(),
            label: label.to_string(),
            n_tasks: n,
            success,
            crash,
            timeout,
            success_rate: success as f64 / denom,
            crash_rate: crash as f64 / denom,
            timeout_rate: timeout as f64 / denom,
            mean_score: episodes.iter().map(|e| e.score).sum::<f64>() / denom,
            mean_steps: episodes.iter().map(|e| e.steps as f64).sum::<f64>() / denom,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: String,
    pub label: String,
    pub seed: u64,
    pub scenarios: Vec<ScenarioReport>,
}

pub struct EvalRun {
    pub report: EvalReport,
    pub episodes: Vec<EpisodeRecord>,
}

/// Deterministic task list for `(scenario, n, seed)`.
pub fn eval_tasks(scenario: &Scenario, n: usize, seed: u64) -> Result<Vec<EvalTask>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_tasks(scenario, n, &mut rng)?)
}

pub fn observation_builder<P: EvalPolicy + ?Sized>(policy: &P, lidar: &LidarConfig) -> Result<ObservationBuilder, EvalError> {
    Ok(ObservationBuilder::with_canonical(*lidar, LidarConfig::canonical(), policy.downsample_windows())?)
}

fn support_of(obs: &Observation, indices: &std::collections::BTreeMap<usize, usize>) -> Vec<SupportPoint> {
    indices
        .iter()
        .map(|(&i, &m)| {
            let p = obs.points[i];
            let (px, py) = (p[0] as f64, p[1] as f64);
            let n2 = px * px + py * py;
            SupportPoint { x: px / n2, y: py / n2, multiplicity: m }
        })
        .collect()
}

/// Runs one episode to completion.
///
/// `observer` sees every decision together with the observation it was made on.
pub fn run_episode_with<P: EvalPolicy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    builder: &ObservationBuilder,
    task_index: usize,
    task: &EvalTask,
    options: EvalOptions,
    observer: &mut dyn FnMut(&Observation, &crate::eval::Decision),
) -> Result<EpisodeRecord, EvalError> {
    let mut episode = Episode::from_task(scenario, task);
    let mut records = Vec::new();
    let mut k = 0;
    while !episode.is_done() {
        let robot = *episode.robot();
        let goal = episode.goal();
        let obs = builder.observe(scenario, &robot, goal);
        let decision = policy.decide(&obs)?;
        observer(&obs, &decision);
        if let (Some(every), Some(out)) = (options.trace_interval, &decision.output) {
            k = k.max(out.support_indices.len());
            if every > 0 && episode.steps() % every == 0 && !out.support_indices.is_empty() {
                records.push(TraceRecord {
                    step: episode.steps(),
                    pose: robot.pose,
                    v: robot.v,
                    omega: robot.omega,
                    goal: [goal.x, goal.y],
                    support: support_of(&obs, &out.support_multiplicity),
                });
            }
        }
        match decision.control {
            Control::Velocity(a) => episode.step(a),
            Control::TeleportToGoal => episode.teleport(Pose::new(goal.x, goal.y, robot.pose.theta)),
        };
    }
    let outcome = episode.outcome().expect("episode finished");
    let trace = options.trace_interval.filter(|_| !records.is_empty()).map(|_| SupportPointTrace {
        scenario: scenario.name.clone(),
        task_index,
        k,
        records,
        path: outcome.trajectory.iter().map(|s| [s.pose.x, s.pose.y, s.pose.theta]).collect(),
        status: Some(outcome.status),
    });
    Ok(EpisodeRecord {
        task_index,
        task: *task,
        status: outcome.status,
        steps: outcome.steps,
        score: score_of(outcome.status, outcome.steps),
        trace,
    })
}

pub fn run_episode<P: EvalPolicy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    builder: &ObservationBuilder,
    task_index: usize,
    task: &EvalTask,
    options: EvalOptions,
) -> Result<EpisodeRecord, EvalError> {
    run_episode_with(policy, scenario, builder, task_index, task, options, &mut |_, _| {})
}

/// Runs `tasks` in parallel; results are in task order.
pub fn run_tasks<P: EvalPolicy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    lidar: &LidarConfig,
    tasks: &[EvalTask],
    options: EvalOptions,
) -> Result<Vec<EpisodeRecord>, EvalError> {
    let builder = observation_builder(policy, lidar)?;
    tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| run_episode(policy, scenario, &builder, i, task, options))
        .collect()
}

/// Evaluates `policy` on `n_tasks` seeded random tasks in `scenario`.
pub fn run_eval<P: EvalPolicy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    lidar: &LidarConfig,
    n_tasks: usize,
    seed: u64,
    options: EvalOptions,
) -> Result<EvalRun, EvalError> {
    let tasks = eval_tasks(scenario, n_tasks, seed)?;
    let episodes = run_tasks(policy, scenario, lidar, &tasks, options)?;
    let label = format_lidar_label(lidar);
    let report = EvalReport {
        model_kind: policy.model_kind().to_string(),
        label: label.clone(),
        seed,
        scenarios: vec![ScenarioReport::aggregate(&scenario.name, &label, &episodes)],
    };
    Ok(EvalRun { report, episodes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model_kind: String,
    pub seed: u64,
    pub n_tasks: usize,
    pub rows: Vec<ScenarioReport>,
}

/// Every sensor setup on every scenario; each scenario keeps one task list across setups.
pub fn sweep<P: EvalPolicy + ?Sized>(
    policy: &P,
    lidars: &[LidarConfig],
    scenarios: &[Scenario],
    n_tasks: usize,
    seed: u64,
) -> Result<SweepReport, EvalError> {
    let mut rows = Vec::new();
    for scenario in scenarios {
        let tasks = eval_tasks(scenario, n_tasks, seed)?;
        for lidar in lidars {
            let episodes = run_tasks(policy, scenario, lidar, &tasks, EvalOptions::default())?;
            rows.push(ScenarioReport::aggregate(&scenario.name, &format_lidar_label(lidar), &episodes));
        }
    }
    Ok(SweepReport { model_kind: policy.model_kind().to_string(), seed, n_tasks, rows })
}
