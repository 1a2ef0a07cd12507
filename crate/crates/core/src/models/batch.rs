use crate::nn::{NnError, Segments, Tensor};
use crate::scalar::Scalar;
use crate::sensing::{GoalVelocityState, ObstaclePointSet, Observation};

/// Stacked point sets of a batch: rows of sample `s` are `segments.range(s)`.
#[derive(Clone, Debug)]
pub struct PointBatch<T> {
    pub points: Tensor<T>,
    pub segments: Segments,
}

impl<T: Scalar> PointBatch<T> {
    pub fn from_sets(sets: &[&[[f64; 2]]]) -> Result<Self, NnError> {
        if sets.iter().any(|s| s.is_empty()) {
            return Err(NnError::Shape("empty point set".into()));
        }
        let data = sets.iter().flat_map(|s| s.iter().flat_map(|p| [T::of(p[0]), T::of(p[1])])).collect();
        let segments = Segments::from_lengths(sets.iter().map(|s| s.len()))?;
        Ok(Self { points: Tensor::from_vec(segments.total(), 2, data)?, segments })
    }

    pub fn samples(&self) -> usize {
        self.segments.count()
    }

    /// Rows `rows[s]` (indices local to sample `s`) of every sample.
    pub fn gather(&self, rows: &[Vec<usize>]) -> Result<Self, NnError> {
        let mut data = Vec::new();
        for (s, local) in rows.iter().enumerate() {
            let base = self.segments.range(s).start;
            for &i in local {
                data.extend_from_slice(self.points.row(base + i));
            }
        }
        let segments = Segments::from_lengths(rows.iter().map(|r| r.len()))?;
        Ok(Self { points: Tensor::from_vec(segments.total(), 2, data)?, segments })
    }

    /// Maps reciprocal encodings `p = x / |x|²` back to coordinates `x`.
    pub fn to_coordinates(&self) -> Self {
        let mut points = self.points.clone();
        for r in 0..points.rows() {
            let row = points.row_mut(r);
            let n2 = row[0] * row[0] + row[1] * row[1];
            row[0] /= n2;
            row[1] /= n2;
        }
        Self { points, segments: self.segments.clone() }
    }
}

/// Network inputs for a batch of time steps.
#[derive(Clone, Debug)]
pub struct StateBatch<T> {
    pub points: PointBatch<T>,
    /// `B × m` reciprocal downsampled scans.
    pub downsampled: Tensor<T>,
    /// `B × 4` goal/velocity vectors.
    pub goal: Tensor<T>,
}

impl<T: Scalar> StateBatch<T> {
    pub fn from_observations(obs: &[&Observation]) -> Result<Self, NnError> {
        if obs.is_empty() {
            return Err(NnError::Shape("empty batch".into()));
        }
        if obs.iter().any(|o| o.points.is_empty()) {
            return Err(NnError::Shape("empty point set".into()));
        }
        let m = obs[0].downsampled.len();
        if obs.iter().any(|o| o.downsampled.len() != m) {
            return Err(NnError::Shape("inconsistent downsampled lengths".into()));
        }
        let pts = obs
            .iter()
            .flat_map(|o| o.points.iter().flat_map(|p| [T::of(p[0] as f64), T::of(p[1] as f64)]))
            .collect();
        let segments = Segments::from_lengths(obs.iter().map(|o| o.points.len()))?;
        let points = PointBatch { points: Tensor::from_vec(segments.total(), 2, pts)?, segments };
        let ds = obs.iter().flat_map(|o| o.downsampled.iter().map(|&v| T::of(v as f64))).collect();
        let goal = obs.iter().flat_map(|o| o.goal.to_array().map(T::of)).collect();
        Ok(Self {
            points,
            downsampled: Tensor::from_vec(obs.len(), m, ds)?,
            goal: Tensor::from_vec(obs.len(), 4, goal)?,
        })
    }

    /// Single-sample batch from full-precision inputs.
    pub fn single(points: &ObstaclePointSet, downsampled: &[f64], goal: &GoalVelocityState) -> Result<Self, NnError> {
        Ok(Self {
            points: PointBatch::from_sets(&[&points.points])?,
            downsampled: Tensor::from_f64(1, downsampled.len(), downsampled)?,
            goal: Tensor::from_f64(1, 4, &goal.to_array())?,
        })
    }

    pub fn samples(&self) -> usize {
        self.goal.rows()
    }
}
