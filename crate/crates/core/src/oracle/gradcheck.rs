//! Central finite differences against the tape gradients.

use rand::Rng;

use crate::models::{Actor, ActorKind, CriticKind, Critics, ModelConfig, PointBatch, StateBatch};
use crate::nn::{Graph, ParamSet, Tensor};
use crate::oracle::reference::{self, RefState};

/// Denominator floor of the relative error, so that gradients which are zero
/// up to rounding do not produce spurious failures.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, Default)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

impl GradCheck {
    fn merge(&mut self, other: GradCheck) {
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
        self.checked += other.checked;
    }
}

/// Compares `analytic` (aligned with `params`) to central differences of `loss`.
pub fn compare<M>(
    model: &mut M,
    params: fn(&mut M) -> &mut ParamSet<f64>,
    loss: impl Fn(&M) -> f64,
    analytic: &[Tensor<f64>],
    h: f64,
) -> GradCheck {
    let mut report = GradCheck::default();
    let count = params(model).len();
    for pi in 0..count {
        let n = params(model).iter().nth(pi).expect("param").value.len();
        for e in 0..n {
            let original = params(model).iter().nth(pi).unwrap().value.data()[e];
            let set = |m: &mut M, v: f64| params(m).iter_mut().nth(pi).unwrap().value.data_mut()[e] = v;
            set(model, original + h);
            let up = loss(model);
            set(model, original - h);
            let down = loss(model);
            set(model, original);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].data()[e];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_empty() {
                report.max_rel_error = report.max_rel_error.max(err);
                let name = &params(model).iter().nth(pi).unwrap().name;
                report.worst = format!("{name}[{e}]: analytic {a:e}, numeric {numeric:e}");
            }
        }
    }
    report
}

pub fn small_config() -> ModelConfig {
    ModelConfig { k: 4, h: 6, head: vec![8, 8], fc_hidden: vec![8, 8], downsample_m: 6 }
}

pub fn random_state(rng: &mut impl Rng, n_points: usize, m: usize) -> RefState {
    let points = (0..n_points)
        .map(|_| {
            let a: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let d: f64 = rng.random_range(0.3..5.0);
            [a.sin() / d, a.cos() / d]
        })
        .collect();
    let downsampled = (0..m).map(|_| rng.random_range(0.2..3.0)).collect();
    let goal = [
        rng.random_range(0.5..6.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(0.0..0.5),
        rng.random_range(-1.5..1.5),
    ];
    RefState { points, downsampled, goal }
}

pub fn to_batch(states: &[RefState]) -> StateBatch<f64> {
    let sets: Vec<&[[f64; 2]]> = states.iter().map(|s| s.points.as_slice()).collect();
    let m = states[0].downsampled.len();
    let ds: Vec<f64> = states.iter().flat_map(|s| s.downsampled.iter().copied()).collect();
    let goal: Vec<f64> = states.iter().flat_map(|s| s.goal).collect();
    StateBatch {
        points: PointBatch::from_sets(&sets).expect("nonempty sets"),
        downsampled: Tensor::from_f64(states.len(), m, &ds).expect("shape"),
        goal: Tensor::from_f64(states.len(), 4, &goal).expect("shape"),
    }
}

/// Smallest gap between the best and second-best point of any pooled channel.
pub fn pool_margin(params: &ParamSet<f64>, prefix: &str, points: &[[f64; 2]], goal: &[f64; 4]) -> f64 {
    let mut margin = f64::INFINITY;
    let (_, arg) = reference::extract(params, prefix, points, goal);
    for (j, &best) in arg.iter().enumerate() {
        let (top, _) = reference::extract(params, prefix, &points[best..=best], goal);
        for (r, p) in points.iter().enumerate() {
            if r != best {
                let (f, _) = reference::extract(params, prefix, std::slice::from_ref(p), goal);
                margin = margin.min(top[j] - f[j]);
            }
        }
    }
    margin
}

fn randomize(params: &mut ParamSet<f64>, rng: &mut impl Rng) {
    for p in params.iter_mut() {
        for v in p.value.data_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
}

fn coeffs(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_f64(rows, cols, &data).expect("shape")
}

fn weighted(g: &mut Graph<f64>, x: crate::nn::Var, c: &Tensor<f64>) -> crate::nn::Var {
    let cv = g.input(c.clone());
    let prod = g.mul(x, cv).expect("same shape");
    g.sum(prod)
}

fn actor_loss(actor: &Actor<f64>, batch: &StateBatch<f64>, cm: &Tensor<f64>, cs: &Tensor<f64>, tracked: bool, prune: bool) -> (f64, Option<Vec<Tensor<f64>>>) {
    let mut g = Graph::new();
    let bound = if tracked { actor.params.bind(&mut g) } else { actor.params.bind_frozen(&mut g) };
    let vars = actor.forward(&mut g, &bound, batch, prune).expect("forward");
    let a = weighted(&mut g, vars.mean, cm);
    let b = weighted(&mut g, vars.log_std, cs);
    let loss = g.add(a, b).expect("scalars");
    let value = g.value(loss).item();
    let grads = tracked.then(|| {
        let grads = g.backward(loss).expect("backward");
        bound.0.iter().zip(actor.params.iter()).map(|(&v, p)| grads.of(v).cloned().unwrap_or_else(|| Tensor::zeros(p.value.rows(), p.value.cols()))).collect()
    });
    (value, grads)
}

fn critic_loss(critics: &Critics<f64>, batch: &StateBatch<f64>, actions: &Tensor<f64>, c: &[Tensor<f64>; 3], tracked: bool, prune: bool) -> (f64, Option<Vec<Tensor<f64>>>) {
    let mut g = Graph::new();
    let bound = if tracked { critics.params.bind(&mut g) } else { critics.params.bind_frozen(&mut g) };
    let feat = critics.features(&mut g, &bound, batch, prune).expect("features");
    let a = g.input(actions.clone());
    let v = critics.value(&mut g, &bound, feat).expect("value");
    let q1 = critics.q(&mut g, &bound, feat, a, 0).expect("q1");
    let q2 = critics.q(&mut g, &bound, feat, a, 1).expect("q2");
    let lv = weighted(&mut g, v, &c[0]);
    let l1 = weighted(&mut g, q1, &c[1]);
    let l2 = weighted(&mut g, q2, &c[2]);
    let s = g.add(lv, l1).expect("scalars");
    let loss = g.add(s, l2).expect("scalars");
    let value = g.value(loss).item();
    let grads = tracked.then(|| {
        let grads = g.backward(loss).expect("backward");
        bound.0.iter().zip(critics.params.iter()).map(|(&v, p)| grads.of(v).cloned().unwrap_or_else(|| Tensor::zeros(p.value.rows(), p.value.cols()))).collect()
    });
    (value, grads)
}

/// Network families covered by the gradient check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Actor(ActorKind),
    Critic(CriticKind),
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Actor(ActorKind::Spn),
        Family::Actor(ActorKind::FcNet),
        Family::Actor(ActorKind::PointNet),
        Family::Critic(CriticKind::Spn),
        Family::Critic(CriticKind::SpnV2),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Actor(k) => k.model_kind(),
            Family::Critic(k) => k.model_kind(),
        }
    }
}

fn margin_ok(params: &ParamSet<f64>, states: &[RefState], coords: bool) -> bool {
    states.iter().all(|s| {
        let pts: Vec<[f64; 2]> = if coords {
            s.points.iter().map(|q| {
                let n2 = q[0] * q[0] + q[1] * q[1];
                [q[0] / n2, q[1] / n2]
            }).collect()
        } else {
            s.points.clone()
        };
        pool_margin(params, "extract", &pts, &s.goal) > 1e-4
    })
}

/// Gradient check of one randomly drawn instance of `family`.
///
/// Instances whose max-pool has a near tie are redrawn, since a finite
/// difference across a switch of the arg-max is not a derivative.
pub fn check_instance(family: Family, rng: &mut impl Rng, h: f64) -> GradCheck {
    let cfg = small_config();
    loop {
        let states: Vec<RefState> = (0..2).map(|i| random_state(rng, 4 + 3 * i, cfg.downsample_m)).collect();
        let batch = to_batch(&states);
        match family {
            Family::Actor(kind) => {
                let mut actor = Actor::<f64>::new(kind, cfg.clone(), rng).expect("actor");
                randomize(&mut actor.params, rng);
                if kind != ActorKind::FcNet && !margin_ok(&actor.params, &states, kind == ActorKind::PointNet) {
                    continue;
                }
                let (cm, cs) = (coeffs(rng, 2, 2), coeffs(rng, 2, 2));
                let (_, grads) = actor_loss(&actor, &batch, &cm, &cs, true, false);
                let grads = grads.expect("tracked");
                let mut report = compare(&mut actor, |a| &mut a.params, |a| actor_loss(a, &batch, &cm, &cs, false, false).0, &grads, h);
                // the pruned tape must give the same gradients
                let (_, pruned) = actor_loss(&actor, &batch, &cm, &cs, true, true);
                report.merge(same(&grads, &pruned.expect("tracked"), "pruned"));
                return report;
            }
            Family::Critic(kind) => {
                let mut critics = Critics::<f64>::new(kind, cfg.clone(), rng).expect("critics");
                randomize(&mut critics.params, rng);
                if kind == CriticKind::SpnV2 && !margin_ok(&critics.params, &states, false) {
                    continue;
                }
                let actions = coeffs(rng, 2, 2);
                let c = [coeffs(rng, 2, 1), coeffs(rng, 2, 1), coeffs(rng, 2, 1)];
                let (_, grads) = critic_loss(&critics, &batch, &actions, &c, true, false);
                let grads = grads.expect("tracked");
                let mut report = compare(&mut critics, |c| &mut c.params, |cr| critic_loss(cr, &batch, &actions, &c, false, false).0, &grads, h);
                let (_, pruned) = critic_loss(&critics, &batch, &actions, &c, true, true);
                report.merge(same(&grads, &pruned.expect("tracked"), "pruned"));
                return report;
            }
        }
    }
}

fn same(a: &[Tensor<f64>], b: &[Tensor<f64>], what: &str) -> GradCheck {
    let mut r = GradCheck::default();
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        for (e, (&u, &v)) in x.data().iter().zip(y.data()).enumerate() {
            let err = relative_error(u, v);
            r.checked += 1;
            if err > r.max_rel_error {
                r.max_rel_error = err;
                r.worst = format!("{what} tensor {i}[{e}]: {u:e} vs {v:e}");
            }
        }
    }
    r
}
