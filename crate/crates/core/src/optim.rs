//! SGD with classical momentum.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::params::Parameters;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Descend a loss. Weight decay applies.
    Minimize,
    /// Ascend an objective. Weight decay is ignored.
    Maximize,
}

/// Hyper-parameters and velocity buffers for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    velocity: Vec<Vec<f64>>,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Coefficient `λ` of an `λ‖Φ‖²` penalty; adds `2λΦ` to the gradient.
    pub weight_decay: f64,
}

impl SgdState {
    pub fn new<P: Parameters + ?Sized>(params: &P, learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        ensure!(
            learning_rate >= 0.0 && learning_rate.is_finite(),
            Config,
            "learning rate must be finite and non-negative, got {learning_rate}"
        );
        ensure!((0.0..1.0).contains(&momentum), Config, "momentum must lie in [0, 1), got {momentum}");
        ensure!(
            weight_decay >= 0.0 && weight_decay.is_finite(),
            Config,
            "weight decay must be non-negative, got {weight_decay}"
        );
        Ok(Self {
            velocity: params.shape().into_iter().map(|n| vec![0.0; n]).collect(),
            learning_rate,
            momentum,
            weight_decay,
        })
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }
}

/// One momentum step: `v ← μv + g`, then `θ ← θ - lr·v` (minimize) or
/// `θ ← θ + lr·v` (maximize). When minimizing, `g` is first augmented by
/// `2λθ`.
pub fn sgd_step<P, G>(params: &mut P, grads: &G, state: &mut SgdState, direction: Direction) -> Result<()>
where
    P: Parameters + ?Sized,
    G: Parameters + ?Sized,
{
    let pshape = params.shape();
    ensure!(
        pshape == grads.shape(),
        Contract,
        "parameter shape {pshape:?} != gradient shape {:?}",
        grads.shape()
    );
    ensure!(
        pshape.len() == state.velocity.len()
            && pshape.iter().zip(&state.velocity).all(|(n, v)| *n == v.len()),
        Contract,
        "optimizer state does not match parameter shape"
    );
    let lr = state.learning_rate;
    let mu = state.momentum;
    let decay = match direction {
        Direction::Minimize => state.weight_decay,
        Direction::Maximize => 0.0,
    };
    let sign = match direction {
        Direction::Minimize => -1.0,
        Direction::Maximize => 1.0,
    };
    for ((theta, g), v) in params.buffers_mut().into_iter().zip(grads.buffers()).zip(state.velocity.iter_mut()) {
        for ((t, &gi), vi) in theta.iter_mut().zip(g).zip(v.iter_mut()) {
            let step_grad = if decay != 0.0 { gi + 2.0 * decay * *t } else { gi };
            *vi = mu * *vi + step_grad;
            *t += sign * lr * *vi;
        }
    }
    Ok(())
}

/// Learning rate after dividing by `factor` once for every milestone
/// `<= epoch`.
pub fn step_decay(base: f64, epoch: usize, milestones: &[usize], factor: f64) -> f64 {
    let hits = milestones.iter().filter(|&&m| epoch >= m).count();
    let mut lr = base;
    for _ in 0..hits {
        lr /= factor;
    }
    lr
}
