//! Point-wise feature extraction with an optional goal-conditioned gate,
//! followed by channel-wise max pooling.
//!
//! Per point `p`: `h(p) = lrelu(p·W₁ + b₁) ⊙ sigm(g·W₂ + b₂)`, then
//! `f(p) = h(p)·W₃ + b₃ ∈ ℝᴷ`. Channel `j` of the pooled output is the max of
//! `f_j` over all points, and the point attaining it is that channel's
//! support point. Without the gate the extractor is a plain PointNet block.

use rand::Rng;
use rayon::prelude::*;

use crate::models::batch::PointBatch;
use crate::nn::{Bound, Graph, NnError, ParamId, ParamSet, Tensor, Var, LRELU_SLOPE};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct PointExtractor {
    pub hidden: usize,
    pub features: usize,
    w1: ParamId,
    b1: ParamId,
    gate: Option<(ParamId, ParamId)>,
    w3: ParamId,
    b3: ParamId,
}

/// Result of a tracked extraction.
pub struct Extracted {
    /// `B × K` pooled features.
    pub pooled: Var,
    /// Per sample, per channel: index of the support point within that sample.
    pub support: Vec<Vec<usize>>,
}

impl PointExtractor {
    pub fn build<T: Scalar>(
        params: &mut ParamSet<T>,
        prefix: &str,
        hidden: usize,
        features: usize,
        gated: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let w1 = params.add_weight(format!("{prefix}.point_w"), 2, hidden, rng);
        let b1 = params.add_bias(format!("{prefix}.point_b"), hidden, 0.0);
        let gate = gated.then(|| {
            (
                params.add_weight(format!("{prefix}.gate_w"), 4, hidden, rng),
                params.add_bias(format!("{prefix}.gate_b"), hidden, 0.0),
            )
        });
        let w3 = params.add_weight(format!("{prefix}.feat_w"), hidden, features, rng);
        let b3 = params.add_bias(format!("{prefix}.feat_b"), features, 0.0);
        Self { hidden, features, w1, b1, gate, w3, b3 }
    }

    pub fn is_gated(&self) -> bool {
        self.gate.is_some()
    }

    pub fn gate_ids(&self) -> Option<(ParamId, ParamId)> {
        self.gate
    }

    /// Gate activations `sigm(g·W₂ + b₂)` for each row of `goal` (all ones when ungated).
    pub fn gate_values<T: Scalar>(&self, params: &ParamSet<T>, goal: &Tensor<T>) -> Tensor<T> {
        match self.gate {
            None => Tensor::filled(goal.rows(), self.hidden, T::one()),
            Some((w, b)) => {
                let mut z = goal.matmul(params.value(w)).expect("gate shape");
                let bias = params.value(b).data();
                for r in 0..z.rows() {
                    for (v, &bb) in z.row_mut(r).iter_mut().zip(bias) {
                        *v = crate::nn::sigmoid(*v + bb);
                    }
                }
                z
            }
        }
    }

    /// Point features `f(p)` (`n × K`) of one sample; scratch-free reference path.
    pub fn point_features<T: Scalar>(&self, params: &ParamSet<T>, points: &Tensor<T>, gate_row: &[T]) -> Tensor<T> {
        let slope = T::of(LRELU_SLOPE);
        let mut h = points.matmul(params.value(self.w1)).expect("point layer shape");
        let b1 = params.value(self.b1).data();
        for r in 0..h.rows() {
            for ((v, &b), &gv) in h.row_mut(r).iter_mut().zip(b1).zip(gate_row) {
                *v = crate::nn::lrelu(*v + b, slope) * gv;
            }
        }
        let mut f = h.matmul(params.value(self.w3)).expect("feature layer shape");
        let b3 = params.value(self.b3).data();
        for r in 0..f.rows() {
            for (v, &b) in f.row_mut(r).iter_mut().zip(b3) {
                *v += b;
            }
        }
        f
    }

    /// Support point of every channel for every sample, without recording a graph.
    ///
    /// Ties go to the lowest point index.
    pub fn support_points<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        batch: &PointBatch<T>,
        goal: &Tensor<T>,
    ) -> Vec<Vec<usize>> {
        let gates = self.gate_values(params, goal);
        let k = self.features;
        (0..batch.samples())
            .into_par_iter()
            .map(|s| {
                let range = batch.segments.range(s);
                let rows = range.len();
                let pts = Tensor::from_vec(rows, 2, batch.points.data()[range.start * 2..range.end * 2].to_vec())
                    .expect("point rows");
                let f = self.point_features(params, &pts, gates.row(s));
                let mut best: Vec<T> = f.row(0).to_vec();
                let mut arg = vec![0usize; k];
                for r in 1..rows {
                    for ((b, a), &v) in best.iter_mut().zip(arg.iter_mut()).zip(f.row(r)) {
                        if v > *b {
                            *b = v;
                            *a = r;
                        }
                    }
                }
                arg
            })
            .collect()
    }

    /// Records extraction on `points`, returning pooled features and support indices.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        points: &PointBatch<T>,
        goal: Var,
    ) -> Result<Extracted, NnError> {
        let p = g.input(points.points.clone());
        let pre = g.dense(p, bound.get(self.w1), bound.get(self.b1))?;
        let mut h = g.lrelu(pre, T::of(LRELU_SLOPE));
        if let Some((w2, b2)) = self.gate {
            let z = g.dense(goal, bound.get(w2), bound.get(b2))?;
            let gate = g.sigmoid(z);
            h = g.segment_mul(h, gate, &points.segments)?;
        }
        let f = g.dense(h, bound.get(self.w3), bound.get(self.b3))?;
        let (pooled, argmax) = g.segment_max_pool(f, &points.segments)?;
        let k = self.features;
        let support = (0..points.samples())
            .map(|s| {
                let base = points.segments.range(s).start;
                argmax[s * k..(s + 1) * k].iter().map(|&r| r - base).collect()
            })
            .collect();
        Ok(Extracted { pooled, support })
    }

    /// Same result as [`forward`](Self::forward), but only the support points
    /// of each sample are recorded on the tape.
    ///
    /// Max pooling routes gradient to the arg-max rows alone, so restricting
    /// the graph to those rows leaves values and gradients unchanged while
    /// skipping the bulk of a dense scan.
    pub fn forward_pruned<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        params: &ParamSet<T>,
        points: &PointBatch<T>,
        goal: Var,
    ) -> Result<Extracted, NnError> {
        let goal_values = g.value(goal).clone();
        let support = self.support_points(params, points, &goal_values);
        let keep: Vec<Vec<usize>> = support
            .iter()
            .map(|arg| {
                let mut rows = arg.clone();
                rows.sort_unstable();
                rows.dedup();
                rows
            })
            .collect();
        let pruned = points.gather(&keep)?;
        let inner = self.forward(g, bound, &pruned, goal)?;
        let support = inner
            .support
            .iter()
            .zip(&keep)
            .map(|(local, rows)| local.iter().map(|&i| rows[i]).collect())
            .collect();
        Ok(Extracted { pooled: inner.pooled, support })
    }
}
