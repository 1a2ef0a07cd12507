use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    pub initial: Vec<f64>,
    /// Episodes in each environment's rolling success window.
    pub window: usize,
    /// Window success rate that promotes the environment holding the largest weight.
    pub threshold: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self { initial: vec![0.7, 0.1, 0.1, 0.1], window: 50, threshold: 0.9 }
    }
}

/// Scenario selection probabilities that move toward harder environments.
///
/// When the environment currently holding the largest probability reaches the
/// success threshold over a full window, its probability is exchanged with the
/// next environment's. Once the last environment holds the largest
/// probability the schedule is frozen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub probabilities: Vec<f64>,
    pub windows: Vec<VecDeque<bool>>,
    pub frozen: bool,
    window: usize,
    threshold: f64,
}

impl CurriculumState {
    pub fn new(config: &CurriculumConfig) -> Self {
        let n = config.initial.len();
        let mut state = Self {
            probabilities: config.initial.clone(),
            windows: vec![VecDeque::with_capacity(config.window); n],
            frozen: false,
            window: config.window,
            threshold: config.threshold,
        };
        state.frozen = state.leader() + 1 >= n;
        state
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Index of the environment with the largest probability (first on ties).
    pub fn leader(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }

    pub fn success_rate(&self, env: usize) -> f64 {
        let w = &self.windows[env];
        if w.is_empty() {
            0.0
        } else {
            w.iter().filter(|&&s| s).count() as f64 / w.len() as f64
        }
    }

    /// Records an episode result and applies the promotion rule.
    pub fn update(&mut self, env: usize, success: bool) {
        let w = &mut self.windows[env];
        if w.len() == self.window {
            w.pop_front();
        }
        w.push_back(success);
        if self.frozen {
            return;
        }
        let lead = self.leader();
        if env == lead && self.windows[env].len() == self.window && self.success_rate(env) >= self.threshold {
            self.probabilities.swap(lead, lead + 1);
            self.frozen = lead + 1 == self.len() - 1;
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }
}

/// Functional form of [`CurriculumState::update`].
pub fn curriculum_update(mut state: CurriculumState, success: bool, env: usize) -> CurriculumState {
    state.update(env, success);
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(state: &mut CurriculumState, env: usize, successes: usize, total: usize) {
        for i in 0..total {
            state.update(env, i < total - successes || successes == total);
        }
    }

    #[test]
    fn fresh_state() {
        let s = CurriculumState::new(&CurriculumConfig::default());
        assert_eq!(s.probabilities, vec![0.7, 0.1, 0.1, 0.1]);
        assert!(!s.frozen);
    }

    #[test]
    fn promotion_needs_a_full_window() {
        let mut s = CurriculumState::new(&CurriculumConfig::default());
        feed(&mut s, 0, 49, 49);
        assert_eq!(s.probabilities, vec![0.7, 0.1, 0.1, 0.1]);
        s.update(0, true);
        assert_eq!(s.probabilities, vec![0.1, 0.7, 0.1, 0.1]);
    }

    #[test]
    fn successes_elsewhere_do_not_promote() {
        let mut s = CurriculumState::new(&CurriculumConfig::default());
        feed(&mut s, 2, 50, 50);
        assert_eq!(s.probabilities, vec![0.7, 0.1, 0.1, 0.1]);
    }

    #[test]
    fn forty_five_of_fifty_is_enough() {
        let mut s = CurriculumState::new(&CurriculumConfig::default());
        for i in 0..50 {
            s.update(0, i >= 5);
        }
        assert_eq!(s.probabilities, vec![0.1, 0.7, 0.1, 0.1]);
        let mut t = CurriculumState::new(&CurriculumConfig::default());
        for i in 0..50 {
            t.update(0, i >= 6);
        }
        assert_eq!(t.probabilities, vec![0.7, 0.1, 0.1, 0.1]);
    }

    #[test]
    fn freezes_after_third_swap() {
        let mut s = CurriculumState::new(&CurriculumConfig::default());
        for env in 0..3 {
            feed(&mut s, env, 50, 50);
        }
        assert_eq!(s.probabilities, vec![0.1, 0.1, 0.1, 0.7]);
        assert!(s.frozen);
        for env in 0..4 {
            feed(&mut s, env, 50, 50);
        }
        assert_eq!(s.probabilities, vec![0.1, 0.1, 0.1, 0.7]);
    }
}
