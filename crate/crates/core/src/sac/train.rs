use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{eval_tasks, parse_lidar_label, run_tasks, EvalOptions, ScenarioReport};
use crate::models::policy::{ACTION_SCALE, ACTION_SHIFT};
use crate::models::{sample_action, Actor, Critics, StateBatch};
use crate::nn::{AdamConfig, AdamState};
use crate::sac::config::TrainConfig;
use crate::sac::curriculum::CurriculumState;
use crate::sac::pid::pid_warmup_action;
use crate::sac::replay::{ReplayBuffer, Transition};
use crate::sac::update::{LossReport, SacAgent};
use crate::sac::SacError;
use crate::scalar::Scalar;
use crate::sensing::{LidarConfig, Observation, ObservationBuilder};
use crate::world::{sample_task, Action, Episode, EpisodeStatus, Scenario};

/// Fallback number of fixed tasks for a training scenario without stored ones.
const FALLBACK_EVAL_TASKS: usize = 4;

/// One evaluation result in the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    pub env: String,
    /// `train` for the training scenarios' fixed tasks, `heldout` otherwise.
    pub phase: String,
    pub score_mean: f64,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
}

impl MetricRecord {
    fn from_report(step: u64, phase: &str, r: &ScenarioReport) -> Self {
        Self {
            step,
            env: r.scenario.clone(),
            phase: phase.to_string(),
            score_mean: r.mean_score,
            success_rate: r.success_rate,
            crash_rate: r.crash_rate,
            timeout_rate: r.timeout_rate,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrainerState {
    seed: u64,
    step: u64,
    episodes: u64,
    curriculum: Option<CurriculumState>,
    env_rng: ChaCha8Rng,
    learn_rng: ChaCha8Rng,
}

#[derive(Serialize, Deserialize)]
struct OptimizerSidecar<T> {
    updates: u64,
    actor: AdamState<T>,
    critics: AdamState<T>,
}

pub struct TrainOutput<T> {
    pub agent: SacAgent<T>,
    pub metrics: Vec<MetricRecord>,
    pub steps: u64,
    pub episodes: u64,
}

/// Pre-squash value that maps to `action` (clipped just inside the box).
fn raw_from_action(a: Action) -> [f64; 2] {
    let lim = 1.0 - 1e-6;
    let inv = |x: f64, j: usize| ((x - ACTION_SHIFT[j]) / ACTION_SCALE[j]).clamp(-lim, lim).atanh();
    [inv(a.v, 0), inv(a.omega, 1)]
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SacError + '_ {
    move |source| SacError::Io { path: path.display().to_string(), source }
}

/// SAC training loop state: the learner, the replay buffer and the schedule.
pub struct Trainer<T> {
    pub config: TrainConfig,
    pub agent: SacAgent<T>,
    scenarios: Arc<Vec<Scenario>>,
    heldout: Vec<Scenario>,
    lidar: LidarConfig,
    builder: ObservationBuilder,
    replay: ReplayBuffer,
    curriculum: Option<CurriculumState>,
    seed: u64,
    env_rng: ChaCha8Rng,
    learn_rng: ChaCha8Rng,
    step: u64,
    episodes: u64,
    metrics: Vec<MetricRecord>,
    last_loss: Option<LossReport>,
    out_dir: Option<PathBuf>,
    metrics_file: Option<BufWriter<File>>,
}

impl<T: Scalar> Trainer<T> {
    /// With as many scenarios as curriculum entries the curriculum picks the
    /// scenario of each episode; otherwise scenarios are drawn uniformly.
    pub fn new(config: TrainConfig, scenarios: Vec<Scenario>, heldout: Vec<Scenario>, seed: u64) -> Result<Self, SacError> {
        config.validate()?;
        if scenarios.is_empty() {
            return Err(SacError::Config("no training scenarios".into()));
        }
        let lidar = parse_lidar_label(&config.lidar)?;
        let builder = ObservationBuilder::with_canonical(lidar, LidarConfig::canonical(), config.model.downsample_m)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Actor::new(config.actor, config.model.clone(), &mut init_rng)?;
        let critics = Critics::new(config.critic, config.model.clone(), &mut init_rng)?;
        let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
        let agent = SacAgent::new(actor, critics, adam, config.hyper());
        let curriculum = (scenarios.len() == config.curriculum.initial.len() && scenarios.len() > 1)
            .then(|| CurriculumState::new(&config.curriculum));
        let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
        env_rng.set_stream(1);
        let mut learn_rng = ChaCha8Rng::seed_from_u64(seed);
        learn_rng.set_stream(2);
        Ok(Self {
            replay: ReplayBuffer::new(config.replay_capacity)?,
            config,
            agent,
            scenarios: Arc::new(scenarios),
            heldout,
            lidar,
            builder,
            curriculum,
            seed,
            env_rng,
            learn_rng,
            step: 0,
            episodes: 0,
            metrics: Vec::new(),
            last_loss: None,
            out_dir: None,
            metrics_file: None,
        })
    }

    /// Writes `metrics.jsonl` and checkpoints under `dir`.
    pub fn with_output(mut self, dir: &Path) -> Result<Self, SacError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("metrics.jsonl");
        let file = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        self.metrics_file = Some(BufWriter::new(file));
        self.out_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    /// Restores weights, optimizer moments and schedule from a checkpoint
    /// directory. The replay buffer is not part of a checkpoint and refills
    /// before updates resume.
    pub fn resume(config: TrainConfig, scenarios: Vec<Scenario>, heldout: Vec<Scenario>, dir: &Path) -> Result<Self, SacError> {
        let state_path = dir.join("trainer.json");
        let state: TrainerState = serde_json::from_str(&fs::read_to_string(&state_path).map_err(io_err(&state_path))?)
            .map_err(|e| SacError::Config(format!("{}: {e}", state_path.display())))?;
        let mut t = Self::new(config, scenarios, heldout, state.seed)?;
        let actor_path = dir.join("actor.spnw");
        t.agent.actor = Actor::load(File::open(&actor_path).map_err(io_err(&actor_path))?)?;
        let critic_path = dir.join("critics.spnw");
        t.agent.critics = Critics::load(File::open(&critic_path).map_err(io_err(&critic_path))?)?;
        let opt_path = dir.join("optimizer.json");
        let opt: OptimizerSidecar<T> = serde_json::from_str(&fs::read_to_string(&opt_path).map_err(io_err(&opt_path))?)
            .map_err(|e| SacError::Config(format!("{}: {e}", opt_path.display())))?;
        t.agent.actor_opt = opt.actor;
        t.agent.critic_opt = opt.critics;
        t.agent.updates = opt.updates;
        t.step = state.step;
        t.episodes = state.episodes;
        t.curriculum = state.curriculum;
        t.env_rng = state.env_rng;
        t.learn_rng = state.learn_rng;
        log::info!("resumed from {} at step {}", dir.display(), t.step);
        Ok(t)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn metrics(&self) -> &[MetricRecord] {
        &self.metrics
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn curriculum(&self) -> Option<&CurriculumState> {
        self.curriculum.as_ref()
    }

    pub fn last_loss(&self) -> Option<LossReport> {
        self.last_loss
    }

    /// Trains until `total_steps` environment steps have been taken.
    pub fn run(&mut self) -> Result<(), SacError> {
        while self.step < self.config.total_steps {
            self.run_episode()?;
        }
        self.flush_metrics()?;
        if let Some(dir) = self.out_dir.clone() {
            self.save_checkpoint(&dir)?;
        }
        Ok(())
    }

    fn policy_action(&mut self, obs: &Observation) -> Result<(Action, [f64; 2]), SacError> {
        if self.episodes < self.config.warmup_episodes {
            let a = pid_warmup_action(&obs.goal);
            return Ok((a, raw_from_action(a)));
        }
        let batch = StateBatch::<T>::from_observations(&[obs])?;
        let out = self.agent.actor.infer_one(&batch)?;
        let (a, _, u) = sample_action(out.mean, out.log_std, &mut self.env_rng);
        Ok((a, u))
    }

    /// Runs one episode (or its prefix up to `total_steps`); returns its end status.
    pub fn run_episode(&mut self) -> Result<Option<EpisodeStatus>, SacError> {
        let scenarios = Arc::clone(&self.scenarios);
        let env = match &self.curriculum {
            Some(c) => c.sample(&mut self.env_rng),
            None if scenarios.len() == 1 => 0,
            None => self.env_rng.random_range(0..scenarios.len()),
        };
        let scenario = &scenarios[env];
        let (start, goal) = sample_task(scenario, &mut self.env_rng)?;
        let mut episode = Episode::new(scenario, start, goal);
        let mut obs = Arc::new(self.builder.observe(scenario, episode.robot(), goal));
        while !episode.is_done() && self.step < self.config.total_steps {
            let (action, raw) = self.policy_action(&obs)?;
            let info = episode.step(action);
            let next = Arc::new(self.builder.observe(scenario, episode.robot(), goal));
            let reward = self.config.reward.compute(info.goal_distance_before, info.goal_distance_after, info.status);
            self.replay.push(Transition {
                state: obs,
                raw_action: raw,
                action: [action.v, action.omega],
                reward,
                next_state: Arc::clone(&next),
                terminal: matches!(info.status, Some(EpisodeStatus::Success | EpisodeStatus::Crash)),
            });
            obs = next;
            self.step += 1;
            self.learn()?;
            self.periodic()?;
        }
        let status = episode.status();
        if let Some(s) = status {
            if let Some(c) = &mut self.curriculum {
                c.update(env, s == EpisodeStatus::Success);
            }
            self.episodes += 1;
            if self.episodes % 50 == 0 {
                log::info!(
                    "step {} episode {} replay {} loss {:?} curriculum {:?}",
                    self.step,
                    self.episodes,
                    self.replay.len(),
                    self.last_loss,
                    self.curriculum.as_ref().map(|c| &c.probabilities)
                );
            }
        }
        Ok(status)
    }

    fn learn(&mut self) -> Result<(), SacError> {
        if self.replay.len() < self.config.min_replay {
            return Ok(());
        }
        let batch = self.replay.sample(self.config.batch_size, &mut self.learn_rng)?;
        let step = self.step;
        let loss = self.agent.update(&batch, &mut self.learn_rng).map_err(|e| match e {
            SacError::NonFinite(m) => SacError::NonFinite(format!("{m} (environment step {step})")),
            e => e,
        })?;
        self.last_loss = Some(loss);
        Ok(())
    }

    fn periodic(&mut self) -> Result<(), SacError> {
        let c = &self.config;
        let due = |every: u64| every > 0 && self.step % every == 0;
        let (eval, heldout, checkpoint) = (due(c.eval_interval), due(c.heldout_interval), due(c.checkpoint_interval));
        if eval {
            self.evaluate_training()?;
        }
        if heldout && !self.heldout.is_empty() {
            self.evaluate_heldout()?;
        }
        if checkpoint {
            if let Some(dir) = self.out_dir.clone() {
                self.save_checkpoint(&dir)?;
            }
        }
        Ok(())
    }

    fn record(&mut self, rec: MetricRecord) -> Result<(), SacError> {
        log::info!("eval {rec:?}");
        if let Some(f) = &mut self.metrics_file {
            let line = serde_json::to_string(&rec).expect("metric record serializes");
            writeln!(f, "{line}").map_err(|source| SacError::Io { path: "metrics.jsonl".into(), source })?;
        }
        self.metrics.push(rec);
        Ok(())
    }

    fn flush_metrics(&mut self) -> Result<(), SacError> {
        if let Some(f) = &mut self.metrics_file {
            f.flush().map_err(|source| SacError::Io { path: "metrics.jsonl".into(), source })?;
        }
        Ok(())
    }

    /// Deterministic policy on each training scenario's fixed tasks.
    pub fn evaluate_training(&mut self) -> Result<Vec<ScenarioReport>, SacError> {
        let scenarios = Arc::clone(&self.scenarios);
        let mut reports = Vec::new();
        for s in scenarios.iter() {
            let tasks = if s.eval_tasks.is_empty() {
                eval_tasks(s, FALLBACK_EVAL_TASKS, self.config.heldout_seed)?
            } else {
                s.eval_tasks.clone()
            };
            let episodes = run_tasks(&self.agent.actor, s, &self.lidar, &tasks, EvalOptions::default())?;
            let report = ScenarioReport::aggregate(&s.name, &self.config.lidar, &episodes);
            self.record(MetricRecord::from_report(self.step, "train", &report))?;
            reports.push(report);
        }
        Ok(reports)
    }

    /// Deterministic policy on seeded random tasks in each held-out scenario.
    pub fn evaluate_heldout(&mut self) -> Result<Vec<ScenarioReport>, SacError> {
        let mut reports = Vec::new();
        for i in 0..self.heldout.len() {
            let s = &self.heldout[i];
            let tasks = eval_tasks(s, self.config.heldout_tasks, self.config.heldout_seed)?;
            let episodes = run_tasks(&self.agent.actor, s, &self.lidar, &tasks, EvalOptions::default())?;
            let report = ScenarioReport::aggregate(&s.name, &self.config.lidar, &episodes);
            self.record(MetricRecord::from_report(self.step, "heldout", &report))?;
            reports.push(report);
        }
        Ok(reports)
    }

    /// Writes weights, the optimizer sidecar and the schedule state into `dir`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<(), SacError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let actor_path = dir.join("actor.spnw");
        self.agent.actor.save(BufWriter::new(File::create(&actor_path).map_err(io_err(&actor_path))?))?;
        let critic_path = dir.join("critics.spnw");
        self.agent.critics.save(BufWriter::new(File::create(&critic_path).map_err(io_err(&critic_path))?))?;
        let sidecar = OptimizerSidecar {
            updates: self.agent.updates,
            actor: self.agent.actor_opt.clone(),
            critics: self.agent.critic_opt.clone(),
        };
        let opt_path = dir.join("optimizer.json");
        fs::write(&opt_path, serde_json::to_string(&sidecar).expect("optimizer state serializes"))
            .map_err(io_err(&opt_path))?;
        let state = TrainerState {
            seed: self.seed,
            step: self.step,
            episodes: self.episodes,
            curriculum: self.curriculum.clone(),
            env_rng: self.env_rng.clone(),
            learn_rng: self.learn_rng.clone(),
        };
        let state_path = dir.join("trainer.json");
        fs::write(&state_path, serde_json::to_string_pretty(&state).expect("trainer state serializes"))
            .map_err(io_err(&state_path))?;
        Ok(())
    }

    pub fn into_output(self) -> TrainOutput<T> {
        TrainOutput { agent: self.agent, metrics: self.metrics, steps: self.step, episodes: self.episodes }
    }
}

/// Trains from scratch without writing any files.
pub fn train_loop<T: Scalar>(
    config: TrainConfig,
    scenarios: Vec<Scenario>,
    heldout: Vec<Scenario>,
    seed: u64,
) -> Result<TrainOutput<T>, SacError> {
    let mut trainer = Trainer::new(config, scenarios, heldout, seed)?;
    trainer.run()?;
    Ok(trainer.into_output())
}
