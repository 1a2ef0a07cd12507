//! Scoring, sensor labels, batch evaluation and trace export.

pub mod label;
pub mod policy;
pub mod runner;
pub mod score;
pub mod trace;

pub use label::{format_lidar_label, parse_lidar_label, preset_labels, PRESETS};
pub use policy::{Control, Decision, EvalPolicy, GoalSeeker, Teleport, ZeroVelocity};
pub use runner::{
    eval_tasks, run_episode, run_episode_with, run_eval, run_tasks, sweep, EpisodeRecord, EvalOptions, EvalReport,
    EvalRun, ScenarioReport, SweepReport, TRACE_INTERVAL,
};
pub use score::{score, score_of};
pub use trace::{export_traces, read_trace_csv, render_svg, write_trace_csv, SupportPoint, SupportPointTrace, TraceRecord};

use crate::models::ModelError;
use crate::nn::NnError;
use crate::sensing::SensingError;
use crate::world::WorldError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("malformed lidar label {0}")]
    Label(String),
    #[error("model/input mismatch: {0}")]
    KindMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
}
