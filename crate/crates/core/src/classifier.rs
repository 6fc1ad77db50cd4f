//! Clip classifier with average fusion over the selected clips.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::nn::{argmax, cross_entropy, softmax, Mlp, MlpGrad, LOG_EPS};
use crate::optim::{sgd_step, Direction, SgdState};
use crate::params::Parameters;
use crate::rng::Prng;

#[derive(Clone, Debug, PartialEq)]
pub struct ClipClassifier {
    pub net: Mlp,
}

impl ClipClassifier {
    /// `feature_dim -> hidden.. -> num_classes`, relu hidden layers.
    pub fn new(feature_dim: usize, hidden: &[usize], num_classes: usize, rng: &mut Prng) -> Result<Self> {
        let mut dims = vec![feature_dim];
        dims.extend_from_slice(hidden);
        dims.push(num_classes);
        Ok(Self { net: Mlp::glorot(&dims, rng)? })
    }

    pub fn num_classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.net.input_dim()
    }
}

/// How per-clip outputs are combined into a video score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Fusion {
    /// Mean of per-clip softmax distributions.
    #[default]
    Probabilities,
    /// Softmax of the mean logits.
    Logits,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoPrediction {
    pub clip_probs: Vec<Vec<f64>>,
    pub fused: Vec<f64>,
    pub predicted: usize,
}

pub fn clip_scores(clf: &ClipClassifier, clip: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&clf.net.predict(clip)?))
}

pub fn video_prediction<C: AsRef<[f64]>>(clf: &ClipClassifier, clips: &[C]) -> Result<VideoPrediction> {
    video_prediction_with(clf, clips, Fusion::Probabilities)
}

pub fn video_prediction_with<C: AsRef<[f64]>>(
    clf: &ClipClassifier,
    clips: &[C],
    fusion: Fusion,
) -> Result<VideoPrediction> {
    ensure!(!clips.is_empty(), Contract, "video prediction needs at least one clip");
    let logits = clips.iter().map(|c| clf.net.predict(c.as_ref())).collect::<Result<Vec<_>>>()?;
    let clip_probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
    let fused = match fusion {
        Fusion::Probabilities => mean_rows(&clip_probs),
        Fusion::Logits => softmax(&mean_rows(&logits)),
    };
    let predicted = argmax(&fused);
    Ok(VideoPrediction { clip_probs, fused, predicted })
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    // running mean: identical rows reproduce the row bit-for-bit
    let mut out = rows[0].clone();
    for (k, r) in rows.iter().enumerate().skip(1) {
        let w = (k + 1) as f64;
        for (o, v) in out.iter_mut().zip(r) {
            *o += (v - *o) / w;
        }
    }
    out
}

/// Cross-entropy of the fused distribution plus `λ Σ Φ²`.
pub fn classification_loss(pred: &VideoPrediction, label: usize, lambda: f64, clf: &ClipClassifier) -> Result<f64> {
    Ok(cross_entropy(&pred.fused, label)? + lambda * clf.net.squared_norm())
}

/// Gradient of the fused cross-entropy at each clip's logits.
///
/// With `H = (1/M) Σ p_m`, `∂(-ln H_y)/∂z_m = -(p_{m,y} / (M H_y)) (e_y - p_m)`;
/// zero when `H_y` sits at the log clamp.
pub fn logit_gradients(pred: &VideoPrediction, label: usize) -> Result<Vec<Vec<f64>>> {
    ensure!(label < pred.fused.len(), Contract, "label {label} out of range for {} classes", pred.fused.len());
    let m = pred.clip_probs.len() as f64;
    let hy = pred.fused[label];
    Ok(pred
        .clip_probs
        .iter()
        .map(|p| {
            if hy <= LOG_EPS {
                return vec![0.0; p.len()];
            }
            let coef = -p[label] / (m * hy);
            p.iter()
                .enumerate()
                .map(|(k, &pk)| coef * (if k == label { 1.0 } else { 0.0 } - pk))
                .collect()
        })
        .collect())
}

fn cross_entropy_grad<C: AsRef<[f64]>>(clf: &ClipClassifier, clips: &[C], label: usize) -> Result<(VideoPrediction, MlpGrad)> {
    let pred = video_prediction(clf, clips)?;
    let dz = logit_gradients(&pred, label)?;
    let mut grad = clf.net.zero_grad();
    for (clip, g) in clips.iter().zip(&dz) {
        let trace = clf.net.forward(clip.as_ref())?;
        clf.net.backward_into(&trace, g, &mut grad)?;
    }
    Ok((pred, grad))
}

/// Loss and full gradient (including `2λΦ`) with respect to `Φ`.
pub fn loss_and_gradient<C: AsRef<[f64]>>(
    clf: &ClipClassifier,
    clips: &[C],
    label: usize,
    lambda: f64,
) -> Result<(f64, MlpGrad)> {
    let (pred, mut grad) = cross_entropy_grad(clf, clips, label)?;
    let loss = classification_loss(&pred, label, lambda, clf)?;
    if lambda != 0.0 {
        for (g, p) in grad.buffers_mut().into_iter().zip(clf.net.buffers()) {
            g.iter_mut().zip(p).for_each(|(gi, pi)| *gi += 2.0 * lambda * pi);
        }
    }
    Ok((loss, grad))
}

/// One minimizing SGD step on the regularized loss; `λ` is
/// `state.weight_decay`. Returns the loss before the step.
pub fn train_classifier_step<C: AsRef<[f64]>>(
    clf: &mut ClipClassifier,
    clips: &[C],
    label: usize,
    state: &mut SgdState,
) -> Result<f64> {
    let (pred, grad) = cross_entropy_grad(clf, clips, label)?;
    let loss = classification_loss(&pred, label, state.weight_decay, clf)?;
    sgd_step(&mut clf.net, &grad, state, Direction::Minimize)?;
    Ok(loss)
}
