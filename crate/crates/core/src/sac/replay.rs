use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sac::SacError;
use crate::sensing::Observation;

/// One environment step. Consecutive transitions share their observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Arc<Observation>,
    /// Pre-squash Gaussian sample.
    pub raw_action: [f64; 2],
    /// Velocity command actually applied `(v, ω)`.
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: Arc<Observation>,
    /// True only when the episode ended in success or collision.
    pub terminal: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self, SacError> {
        if capacity == 0 {
            return Err(SacError::Config("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0, pushed: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of transitions ever pushed.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Oldest-first view of the contents.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<usize>, SacError> {
        if self.items.is_empty() {
            return Err(SacError::EmptyReplay);
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<&Transition>, SacError> {
        Ok(self.sample_indices(batch, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

/// Replay buffer shared between rollout workers and the learner.
///
/// Every push and sample holds the lock for the whole operation, so a reader
/// never observes a partially written transition.
#[derive(Clone, Debug)]
pub struct SharedReplay(Arc<Mutex<ReplayBuffer>>);

impl SharedReplay {
    pub fn new(capacity: usize) -> Result<Self, SacError> {
        Ok(Self(Arc::new(Mutex::new(ReplayBuffer::new(capacity)?))))
    }

    pub fn push(&self, t: Transition) {
        self.0.lock().expect("replay lock poisoned").push(t);
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("replay lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Owned copies of a uniform sample (observations are reference-counted).
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<Transition>, SacError> {
        let guard = self.0.lock().expect("replay lock poisoned");
        Ok(guard.sample(batch, rng)?.into_iter().cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::GoalVelocityState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(tag: f32) -> Arc<Observation> {
        Arc::new(Observation { points: vec![[tag, 1.0]], downsampled: vec![tag], goal: GoalVelocityState::default() })
    }

    pub(crate) fn transition(tag: f64) -> Transition {
        Transition {
            state: obs(tag as f32),
            raw_action: [tag, -tag],
            action: [0.1, 0.2],
            reward: tag,
            next_state: obs(tag as f32 + 1.0),
            terminal: tag as i64 % 2 == 0,
        }
    }

    #[test]
    fn ring_keeps_latest() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            buf.push(transition(i as f64));
        }
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
        assert_eq!(buf.pushed(), 5);
    }

    #[test]
    fn round_trip_is_field_identical() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        let t = transition(7.0);
        buf.push(t.clone());
        assert_eq!(buf.get(0), &t);
    }

    #[test]
    fn empty_sample_errors() {
        let buf = ReplayBuffer::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample(2, &mut rng), Err(SacError::EmptyReplay)));
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn shared_buffer_across_threads() {
        let shared = SharedReplay::new(1000).unwrap();
        std::thread::scope(|s| {
            for w in 0..4 {
                let shared = shared.clone();
                s.spawn(move || {
                    for i in 0..100 {
                        shared.push(transition((w * 100 + i) as f64));
                    }
                });
            }
        });
        assert_eq!(shared.len(), 400);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in shared.sample(50, &mut rng).unwrap() {
            // every sampled transition is internally consistent
            assert_eq!(t.raw_action[0], t.reward);
            assert_eq!(t.next_state.points[0][0], t.state.points[0][0] + 1.0);
        }
    }
}
