//! Loop-based reference implementations, written independently of the
//! optimized code paths they check.

use crate::models::policy::{ACTION_SCALE, ACTION_SHIFT, LOG_STD_MAX, LOG_STD_MIN};
use crate::models::{Actor, ActorKind, CriticKind, Critics};
use crate::nn::{ParamSet, Tensor, LRELU_SLOPE};
use crate::world::{Scenario, Vec2};
use crate::sensing::repr::PAD_TIE_EPS;

pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[l * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}

/// `1 / min` over each of the first `m` windows of length `k`, by explicit loops.
pub fn brute_window_min(distances: &[f64], m: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut best = f64::INFINITY;
        for j in 0..k {
            let d = distances[i * k + j];
            if d < best {
                best = d;
            }
        }
        out.push(1.0 / best);
    }
    out
}

fn vertices(scenario: &Scenario) -> Vec<Vec2> {
    let mut v = vec![scenario.min, Vec2::new(scenario.max.x, scenario.min.y), scenario.max, Vec2::new(scenario.min.x, scenario.max.y)];
    for poly in &scenario.obstacles {
        v.extend(poly.iter().copied());
    }
    v
}

/// Marches along a ray in steps of `step` until it enters occupied space,
/// then bisects the crossing. Near polygon vertices the march is refined a
/// hundredfold so thin corners are not stepped over.
pub fn raymarch(scenario: &Scenario, origin: Vec2, direction: f64, max_range: f64, step: f64) -> f64 {
    let dir = Vec2::new(direction.cos(), direction.sin());
    let at = |t: f64| Vec2::new(origin.x + t * dir.x, origin.y + t * dir.y);
    let corners = vertices(scenario);
    let near_corner = |p: Vec2| corners.iter().any(|c| (p.x - c.x).hypot(p.y - c.y) < 3.0 * step);
    let bisect = |mut lo: f64, mut hi: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if scenario.is_occupied(at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let mut t = 0.0;
    while t < max_range {
        let next = (t + step).min(max_range);
        if near_corner(at(next)) || near_corner(at(t)) {
            let fine = step / 100.0;
            let mut s = t;
            while s < next {
                let sn = (s + fine).min(next);
                if scenario.is_occupied(at(sn)) {
                    return bisect(s, sn);
                }
                s = sn;
            }
        } else if scenario.is_occupied(at(next)) {
            return bisect(t, next);
        }
        t = next;
    }
    max_range
}

/// Smallest distance from `p` to a dense sampling of every wall and obstacle edge.
pub fn sampled_clearance(scenario: &Scenario, p: Vec2, samples_per_edge: usize) -> f64 {
    let mut best = f64::INFINITY;
    for seg in scenario.segments() {
        for i in 0..=samples_per_edge {
            let t = i as f64 / samples_per_edge as f64;
            let q = Vec2::new(seg.a.x + t * (seg.b.x - seg.a.x), seg.a.y + t * (seg.b.y - seg.a.y));
            best = best.min((p.x - q.x).hypot(p.y - q.y));
        }
    }
    best
}

fn gap(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d = std::f64::consts::TAU - d;
    }
    d
}

/// For every target angle, the range of the nearest source beam (lowest index
/// on ties) if it lies within `tolerance`, else `fallback`; values capped at `cap`.
pub fn nearest_angle_exhaustive(
    angles: &[f64],
    distances: &[f64],
    targets: &[f64],
    tolerance: f64,
    fallback: f64,
    cap: f64,
) -> Vec<f64> {
    targets
        .iter()
        .map(|&t| {
            let mut best = (f64::INFINITY, usize::MAX);
            for (i, &a) in angles.iter().enumerate() {
                let g = gap(a, t);
                if g < best.0 - PAD_TIE_EPS {
                    best = (g, i);
                }
            }
            if best.0 <= tolerance {
                distances[best.1].min(cap)
            } else {
                fallback
            }
        })
        .collect()
}

fn layer<'a>(params: &'a ParamSet<f64>, name: &str) -> &'a Tensor<f64> {
    let id = params.by_name(name).unwrap_or_else(|| panic!("missing parameter {name}"));
    params.value(id)
}

fn lrelu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LRELU_SLOPE * x
    }
}

fn sigm(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x·W + b` for a row vector `x`.
fn affine(params: &ParamSet<f64>, w: &str, b: &str, x: &[f64]) -> Vec<f64> {
    let (w, b) = (layer(params, w), layer(params, b));
    assert_eq!(w.rows(), x.len(), "input width of {w:?}");
    (0..w.cols())
        .map(|j| {
            let mut s = b.get(0, j);
            for (i, &xi) in x.iter().enumerate() {
                s += xi * w.get(i, j);
            }
            s
        })
        .collect()
}

pub fn mlp(params: &ParamSet<f64>, prefix: &str, x: &[f64]) -> Vec<f64> {
    let n = (0..).take_while(|i| params.by_name(&format!("{prefix}.w{i}")).is_some()).count();
    let mut h = x.to_vec();
    for i in 0..n {
        h = affine(params, &format!("{prefix}.w{i}"), &format!("{prefix}.b{i}"), &h);
        if i + 1 < n {
            h = h.into_iter().map(lrelu).collect();
        }
    }
    h
}

/// Per-point features and their channel-wise maximum; returns `(pooled, argmax)`.
pub fn extract(params: &ParamSet<f64>, prefix: &str, points: &[[f64; 2]], goal: &[f64; 4]) -> (Vec<f64>, Vec<usize>) {
    let gated = params.by_name(&format!("{prefix}.gate_w")).is_some();
    let gate = if gated {
        affine(params, &format!("{prefix}.gate_w"), &format!("{prefix}.gate_b"), goal).into_iter().map(sigm).collect()
    } else {
        vec![1.0; layer(params, &format!("{prefix}.point_b")).cols()]
    };
    let mut pooled: Vec<f64> = Vec::new();
    let mut arg: Vec<usize> = Vec::new();
    for (r, p) in points.iter().enumerate() {
        let h: Vec<f64> = affine(params, &format!("{prefix}.point_w"), &format!("{prefix}.point_b"), p)
            .into_iter()
            .zip(&gate)
            .map(|(v, g)| lrelu(v) * g)
            .collect();
        let f = affine(params, &format!("{prefix}.feat_w"), &format!("{prefix}.feat_b"), &h);
        if r == 0 {
            pooled = f;
            arg = vec![0; pooled.len()];
        } else {
            for j in 0..f.len() {
                if f[j] > pooled[j] {
                    pooled[j] = f[j];
                    arg[j] = r;
                }
            }
        }
    }
    (pooled, arg)
}

/// State inputs in full precision.
#[derive(Clone, Debug)]
pub struct RefState {
    /// Encoded points `(sin α / d, cos α / d)`.
    pub points: Vec<[f64; 2]>,
    pub downsampled: Vec<f64>,
    pub goal: [f64; 4],
}

/// `(mean, log_std, support)` of the actor.
pub fn actor_stats(actor: &Actor<f64>, s: &RefState) -> ([f64; 2], [f64; 2], Vec<usize>) {
    let p = &actor.params;
    let (mut x, support) = match actor.kind {
        ActorKind::Spn => extract(p, "extract", &s.points, &s.goal),
        ActorKind::PointNet => {
            let coords: Vec<[f64; 2]> = s
                .points
                .iter()
                .map(|q| {
                    let n2 = q[0] * q[0] + q[1] * q[1];
                    [q[0] / n2, q[1] / n2]
                })
                .collect();
            extract(p, "extract", &coords, &s.goal)
        }
        ActorKind::FcNet => (s.downsampled.clone(), Vec::new()),
    };
    x.extend_from_slice(&s.goal);
    let out = mlp(p, "head", &x);
    let clamp = |v: f64| v.clamp(LOG_STD_MIN, LOG_STD_MAX);
    ([out[0], out[1]], [clamp(out[2]), clamp(out[3])], support)
}

fn critic_input(params: &ParamSet<f64>, kind: CriticKind, s: &RefState) -> Vec<f64> {
    let mut x = match kind {
        CriticKind::Spn => s.downsampled.clone(),
        CriticKind::SpnV2 => extract(params, "extract", &s.points, &s.goal).0,
    };
    x.extend_from_slice(&s.goal);
    x
}

/// `(V, Q₁, Q₂)` of the live critics at a scaled action.
pub fn critic_values(critics: &Critics<f64>, s: &RefState, action: [f64; 2]) -> (f64, f64, f64) {
    let x = critic_input(&critics.params, critics.kind, s);
    let v = mlp(&critics.params, "value", &x)[0];
    let mut xa = x;
    xa.extend_from_slice(&action);
    (v, mlp(&critics.params, "q1", &xa)[0], mlp(&critics.params, "q2", &xa)[0])
}

pub fn target_value(critics: &Critics<f64>, s: &RefState) -> f64 {
    let x = critic_input(&critics.target, critics.kind, s);
    mlp(&critics.target, "value", &x)[0]
}

/// Scaled action and log-density for pre-squash sample `u = μ + σ·ε`.
pub fn squashed_sample(mean: [f64; 2], log_std: [f64; 2], eps: [f64; 2]) -> ([f64; 2], f64) {
    let mut action = [0.0; 2];
    let mut logp = 0.0;
    for j in 0..2 {
        let sigma = log_std[j].exp();
        let u = mean[j] + sigma * eps[j];
        let t = u.tanh();
        action[j] = ACTION_SCALE[j] * t + ACTION_SHIFT[j];
        let gauss = -0.5 * eps[j] * eps[j] - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        logp += gauss - (1.0 - t * t).ln() - ACTION_SCALE[j].ln();
    }
    (action, logp)
}
