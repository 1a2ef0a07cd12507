use crate::world::{EpisodeOutcome, EpisodeStatus, T_MAX};

/// Episode score: `1 − 2·T_s/T_max` on success, `−1` otherwise.
pub fn score_of(status: EpisodeStatus, steps: usize) -> f64 {
    match status {
        EpisodeStatus::Success => 1.0 - 2.0 * steps as f64 / T_MAX as f64,
        EpisodeStatus::Crash | EpisodeStatus::Timeout => -1.0,
    }
}

pub fn score(outcome: &EpisodeOutcome) -> f64 {
    score_of(outcome.status, outcome.steps)
}
