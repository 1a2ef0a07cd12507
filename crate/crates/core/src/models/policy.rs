//! Squashed-Gaussian action distribution over the velocity box.
//!
//! A pre-squash sample `u ~ N(μ, σ²)` is mapped through `tanh` and then
//! affinely onto `[0, v_max] × [−ω_max, ω_max]`. Log-densities are those of
//! the final scaled action.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{Graph, NnError, Tensor, Var};
use crate::scalar::Scalar;
use crate::world::{Action, MAX_ANGULAR_SPEED, MAX_LINEAR_SPEED};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const ACTION_SCALE: [f64; 2] = [0.5 * MAX_LINEAR_SPEED, MAX_ANGULAR_SPEED];
pub const ACTION_SHIFT: [f64; 2] = [0.5 * MAX_LINEAR_SPEED, 0.0];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln(1 − tanh²(u))` without cancellation for large `|u|`.
#[inline]
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - crate::nn::softplus(-2.0 * u))
}

pub fn scale_action(squashed: [f64; 2]) -> Action {
    Action::new(
        ACTION_SCALE[0] * squashed[0] + ACTION_SHIFT[0],
        ACTION_SCALE[1] * squashed[1] + ACTION_SHIFT[1],
    )
}

/// Deterministic action: squash and scale the mean.
pub fn deterministic_action(mean: [f64; 2]) -> Action {
    scale_action([mean[0].tanh(), mean[1].tanh()])
}

/// Log-density of the scaled action produced by pre-squash value `u`.
pub fn log_prob(mean: [f64; 2], log_std: [f64; 2], u: [f64; 2]) -> f64 {
    (0..2)
        .map(|j| {
            let z = (u[j] - mean[j]) / log_std[j].exp();
            -0.5 * z * z - log_std[j] - HALF_LN_2PI - log_one_minus_tanh_sq(u[j]) - ACTION_SCALE[j].ln()
        })
        .sum()
}

/// Draws a scaled action; returns `(action, log_prob, pre-squash u)`.
pub fn sample_action(mean: [f64; 2], log_std: [f64; 2], rng: &mut impl Rng) -> (Action, f64, [f64; 2]) {
    let eps: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let u = [mean[0] + log_std[0].exp() * eps[0], mean[1] + log_std[1].exp() * eps[1]];
    (scale_action([u[0].tanh(), u[1].tanh()]), log_prob(mean, log_std, u), u)
}

/// Standard-normal noise matrix for reparameterized sampling.
pub fn noise<T: Scalar>(rows: usize, rng: &mut impl Rng) -> Tensor<T> {
    let data = (0..rows * 2).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
    Tensor::from_vec(rows, 2, data).expect("noise shape")
}

/// Reparameterized sample on the tape.
pub struct PolicySample {
    /// `B × 2` scaled actions.
    pub action: Var,
    /// `B × 1` log-densities.
    pub log_prob: Var,
}

pub fn sample_in_graph<T: Scalar>(
    g: &mut Graph<T>,
    mean: Var,
    log_std: Var,
    eps: Tensor<T>,
) -> Result<PolicySample, NnError> {
    let eps = g.input(eps);
    let std = g.exp(log_std);
    let noise = g.mul(std, eps)?;
    let u = g.add(mean, noise)?;
    let squashed = g.tanh(u);
    let action = g.affine_cols(
        squashed,
        &ACTION_SCALE.map(T::of),
        &ACTION_SHIFT.map(T::of),
    )?;

    // Gaussian part: −ε²/2 − log σ − ln√(2π) − ln scale
    let eps_sq = g.square(eps);
    let half_eps_sq = g.scale(eps_sq, T::of(-0.5));
    let gauss = g.sub(half_eps_sq, log_std)?;
    // tanh correction: ln(1 − tanh² u) = 2(ln 2 − u − softplus(−2u))
    let minus_two_u = g.scale(u, T::of(-2.0));
    let sp = g.softplus(minus_two_u);
    let u_plus_sp = g.add(u, sp)?;
    let neg = g.scale(u_plus_sp, T::of(-2.0));
    let log_det = g.add_scalar(neg, T::of(2.0 * std::f64::consts::LN_2));
    let per_dim = g.sub(gauss, log_det)?;
    let summed = g.sum_cols(per_dim);
    let constant = -2.0 * HALF_LN_2PI - ACTION_SCALE[0].ln() - ACTION_SCALE[1].ln();
    let log_prob = g.add_scalar(summed, T::of(constant));
    Ok(PolicySample { action, log_prob })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_zero_maps_to_box_center() {
        let a = deterministic_action([0.0, 0.0]);
        assert_eq!((a.v, a.omega), (0.25, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, lp, _) = sample_action([0.0, 0.0], [-20.0, -20.0], &mut rng);
        assert!((s.v - 0.25).abs() < 1e-8 && s.omega.abs() < 1e-8);
        assert!(lp.is_finite());
    }

    #[test]
    fn saturation() {
        let a = deterministic_action([50.0, -50.0]);
        assert!((a.v - 0.5).abs() < 1e-12);
        assert!((a.omega + MAX_ANGULAR_SPEED).abs() < 1e-12);
    }

    #[test]
    fn samples_inside_box_with_finite_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..2000 {
            let mean = [(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.11).cos() * 3.0];
            let (a, lp, _) = sample_action(mean, [0.5, -0.3], &mut rng);
            assert!(a.v > 0.0 && a.v < 0.5 && a.omega.abs() < MAX_ANGULAR_SPEED);
            assert!(lp.is_finite());
        }
        // far in the tail the stable correction stays finite
        assert!(log_prob([0.0, 0.0], [2.0, 2.0], [40.0, -40.0]).is_finite());
    }

    #[test]
    fn graph_log_prob_matches_closed_form() {
        let mut g = Graph::<f64>::new();
        let mean = g.input(Tensor::from_vec(2, 2, vec![0.3, -1.2, 2.0, 0.1]).unwrap());
        let log_std = g.input(Tensor::from_vec(2, 2, vec![-0.5, 0.2, 1.0, -2.0]).unwrap());
        let eps = Tensor::from_vec(2, 2, vec![0.7, -0.1, -1.5, 2.2]).unwrap();
        let s = sample_in_graph(&mut g, mean, log_std, eps.clone()).unwrap();
        for r in 0..2 {
            let m = [g.value(mean).get(r, 0), g.value(mean).get(r, 1)];
            let ls = [g.value(log_std).get(r, 0), g.value(log_std).get(r, 1)];
            let u = [m[0] + ls[0].exp() * eps.get(r, 0), m[1] + ls[1].exp() * eps.get(r, 1)];
            let want = log_prob(m, ls, u);
            assert!((g.value(s.log_prob).get(r, 0) - want).abs() < 1e-12);
            let a = scale_action([u[0].tanh(), u[1].tanh()]);
            assert!((g.value(s.action).get(r, 0) - a.v).abs() < 1e-15);
            assert!((g.value(s.action).get(r, 1) - a.omega).abs() < 1e-15);
        }
    }
}
