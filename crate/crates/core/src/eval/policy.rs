use crate::eval::EvalError;
use crate::models::{deterministic_action, Actor, ActorKind, ActorOutput, StateBatch};
use crate::scalar::Scalar;
use crate::sensing::{Observation, DOWNSAMPLE_M};
use crate::world::Action;

/// What the harness should do with the robot this step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Control {
    Velocity(Action),
    /// Move straight onto the goal (stub policies only).
    TeleportToGoal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub control: Control,
    /// Network statistics, including support points for point-set models.
    pub output: Option<ActorOutput>,
}

/// Anything the harness can drive a robot with.
pub trait EvalPolicy: Sync {
    fn model_kind(&self) -> &str;

    /// Window count of the downsampled scan the policy expects.
    fn downsample_windows(&self) -> usize {
        DOWNSAMPLE_M
    }

    fn decide(&self, obs: &Observation) -> Result<Decision, EvalError>;
}

/// Runs the actor deterministically on the squashed mean.
impl<T: Scalar> EvalPolicy for Actor<T> {
    fn model_kind(&self) -> &str {
        self.kind.model_kind()
    }

    fn downsample_windows(&self) -> usize {
        self.config.downsample_m
    }

    fn decide(&self, obs: &Observation) -> Result<Decision, EvalError> {
        if self.kind.uses_points() && obs.points.is_empty() {
            return Err(EvalError::KindMismatch(format!("{} needs obstacle points, got none", self.model_kind())));
        }
        if self.kind == ActorKind::FcNet && obs.downsampled.len() != self.config.downsample_m {
            return Err(EvalError::KindMismatch(format!(
                "{} expects {} downsampled values, got {}",
                self.model_kind(),
                self.config.downsample_m,
                obs.downsampled.len()
            )));
        }
        let batch = StateBatch::<T>::from_observations(&[obs])?;
        let out = self.infer_one(&batch)?;
        Ok(Decision { control: Control::Velocity(deterministic_action(out.mean)), output: Some(out) })
    }
}

/// Never moves.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroVelocity;

impl EvalPolicy for ZeroVelocity {
    fn model_kind(&self) -> &str {
        "zero_velocity"
    }

    fn decide(&self, _: &Observation) -> Result<Decision, EvalError> {
        Ok(Decision { control: Control::Velocity(Action::new(0.0, 0.0)), output: None })
    }
}

/// Jumps onto the goal in one step.
#[derive(Clone, Copy, Debug, Default)]
pub struct Teleport;

impl EvalPolicy for Teleport {
    fn model_kind(&self) -> &str {
        "teleport"
    }

    fn decide(&self, _: &Observation) -> Result<Decision, EvalError> {
        Ok(Decision { control: Control::TeleportToGoal, output: None })
    }
}

/// Turns toward the goal and drives at full speed when aligned; ignores obstacles.
#[derive(Clone, Copy, Debug, Default)]
pub struct GoalSeeker;

impl EvalPolicy for GoalSeeker {
    fn model_kind(&self) -> &str {
        "goal_seeker"
    }

    fn decide(&self, obs: &Observation) -> Result<Decision, EvalError> {
        Ok(Decision { control: Control::Velocity(crate::sac::pid_warmup_action(&obs.goal)), output: None })
    }
}
