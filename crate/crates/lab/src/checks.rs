//! Independent oracles for the learning rules: central finite differences,
//! exact enumeration over a section's actions, and Monte Carlo agreement.
//!
//! Relative error is `|a - n| / max(|a|, |n|, 1e-3)`, so gradients near
//! zero are compared on an absolute scale.

use dsn_core::classifier::{classification_loss, clip_scores, loss_and_gradient, video_prediction, ClipClassifier};
use dsn_core::nn::{argmax, Activation, Layer, Mat, Mlp};
use dsn_core::optim::SgdState;
use dsn_core::sampler::{
    greedy_action, policy_logprob_grad, section_probs, ObservationNet, ObservationShape, SelectionAction,
};
use dsn_core::synth::{ClipFeature, SyntheticVideo};
use dsn_core::trainer::{policy_gradient, policy_gradient_step, reward, Baseline, RewardConfig};
use dsn_core::{Parameters, Prng};

use crate::error::Result;

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;
pub const ENUMERATION_TOLERANCE: f64 = 1e-10;
pub const MC_SIGMAS: f64 = 3.0;
pub const MIN_ACTION_PROB: f64 = 0.01;
/// Instances with a relu pre-activation closer than this to zero are
/// redrawn: a finite-difference step there straddles the kink.
pub const KINK_MARGIN: f64 = 1e-4;

/// Test hook: perturbs the analytic gradients so the checks must fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Corruption {
    pub gradient: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// The quantity compared against `tolerance` (lower is better).
    pub statistic: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, statistic: f64, tolerance: f64, detail: String) -> Self {
        Self { name, statistic, tolerance, passed: statistic <= tolerance, detail }
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn random_clips(n: usize, dim: usize, scale: f64, rng: &mut Prng) -> Vec<ClipFeature> {
    (0..n).map(|_| (0..dim).map(|_| scale * rng.normal()).collect()).collect()
}

/// Largest relative error between `analytic` and central differences of `f`
/// over every parameter of `params`.
fn max_fd_error<P, F>(params: &P, analytic: &[f64], mut f: F) -> f64
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let base = params.flat();
    let mut worst = 0.0f64;
    for (i, &theta) in base.iter().enumerate() {
        let mut plus = params.clone();
        plus.set_flat_entry(i, theta + FD_STEP);
        let mut minus = params.clone();
        minus.set_flat_entry(i, theta - FD_STEP);
        let numeric = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic[i], numeric));
    }
    worst
}

/// Adds small noise to every parameter. Glorot init leaves biases at zero,
/// which can put relu pre-activations exactly on the kink.
fn jitter<P: Parameters>(params: &mut P, rng: &mut Prng) {
    for (i, v) in params.flat().into_iter().enumerate() {
        params.set_flat_entry(i, v + 0.1 * rng.normal());
    }
}

/// Smallest |pre-activation| of any relu unit over `inputs`.
fn kink_distance(net: &Mlp, inputs: &[ClipFeature]) -> f64 {
    let mut closest = f64::INFINITY;
    for x in inputs {
        let mut a = x.clone();
        for layer in net.layers() {
            let z: Vec<f64> = (0..layer.weight.rows())
                .map(|r| layer.weight.row(r).iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + layer.bias[r])
                .collect();
            if layer.activation == Activation::Relu {
                closest = z.iter().fold(closest, |m, v| m.min(v.abs()));
                a = z.into_iter().map(|v| v.max(0.0)).collect();
            } else {
                a = z;
            }
        }
    }
    closest
}

fn corrupt(grad: &mut [f64], c: Corruption) {
    if c.gradient {
        grad.iter_mut().for_each(|g| *g = *g * 1.01 + 1e-3);
    }
}

/// Gradient of the regularized fused cross-entropy on random classifiers,
/// clip sets and labels.
pub fn classifier_gradcheck(instances: usize, seed: u64, c: Corruption) -> Result<CheckOutcome> {
    let mut rng = Prng::new(seed).substream("gradcheck-classifier");
    let mut worst = 0.0f64;
    for i in 0..instances {
        let (dim, classes) = (2 + i % 4, 2 + i % 5);
        let hidden: Vec<usize> = match i % 3 {
            0 => vec![],
            1 => vec![3 + i % 4],
            _ => vec![4, 3],
        };
        let (clf, clips) = loop {
            let mut clf = ClipClassifier::new(dim, &hidden, classes, &mut rng)?;
            jitter(&mut clf.net, &mut rng);
            let clips = random_clips(1 + i % 3, dim, 1.5, &mut rng);
            if kink_distance(&clf.net, &clips) > KINK_MARGIN {
                break (clf, clips);
            }
        };
        let label = rng.below(classes);
        let lambda = 1e-3 * rng.uniform();
        let (_, grad) = loss_and_gradient(&clf, &clips, label, lambda)?;
        let mut analytic = grad.flat();
        corrupt(&mut analytic, c);
        let err = max_fd_error(&clf.net, &analytic, |net| {
            let probe = ClipClassifier { net: net.clone() };
            let pred = video_prediction(&probe, &clips).expect("shapes fixed");
            classification_loss(&pred, label, lambda, &probe).expect("label in range")
        });
        worst = worst.max(err);
    }
    Ok(CheckOutcome::new(
        "classifier loss gradient vs finite differences",
        worst,
        FD_TOLERANCE,
        format!("{instances} instances, max relative error {worst:.3e}"),
    ))
}

fn random_obs(n: usize, dim: usize, rng: &mut Prng) -> Result<ObservationNet> {
    let shape = ObservationShape { feature_dim: dim, encoder_hidden: vec![5], embedding_dim: 3, clips_per_section: n };
    Ok(ObservationNet::new(&shape, rng)?)
}

/// Gradient of `log p_a` through the head and the tied encoders.
pub fn policy_gradcheck(instances: usize, seed: u64, c: Corruption) -> Result<CheckOutcome> {
    let mut rng = Prng::new(seed).substream("gradcheck-policy");
    let mut worst = 0.0f64;
    for i in 0..instances {
        let n = 1 + i % 4;
        let dim = 2 + i % 3;
        let (obs, clips) = loop {
            let mut obs = random_obs(n, dim, &mut rng)?;
            jitter(&mut obs, &mut rng);
            let clips = random_clips(n, dim, 1.5, &mut rng);
            if kink_distance(&obs.encoder, &clips) > KINK_MARGIN {
                break (obs, clips);
            }
        };
        let action = SelectionAction::new(n, rng.below(n));
        let mut analytic = policy_logprob_grad(&obs, &clips, &action)?.flat();
        corrupt(&mut analytic, c);
        let err = max_fd_error(&obs, &analytic, |o| {
            section_probs(o, &clips).expect("shapes fixed").probs()[action.chosen].ln()
        });
        worst = worst.max(err);
    }
    Ok(CheckOutcome::new(
        "log-policy gradient vs finite differences",
        worst,
        FD_TOLERANCE,
        format!("{instances} instances, max relative error {worst:.3e}"),
    ))
}

/// A frozen single-section bandit: policy, classifier, clips and label.
#[derive(Clone, Debug)]
pub struct SectionInstance {
    pub obs: ObservationNet,
    pub clf: ClipClassifier,
    pub video: SyntheticVideo,
}

impl SectionInstance {
    /// Random instance with `n` clips; the label is the first clip's
    /// predicted class so that at least one action earns a positive reward.
    /// Policies giving any action less than [`MIN_ACTION_PROB`] are redrawn
    /// so that Monte Carlo standard errors are meaningful.
    pub fn random(n: usize, rng: &mut Prng) -> Result<Self> {
        let dim = 4;
        loop {
            let obs = random_obs(n, dim, rng)?;
            let clf = ClipClassifier::new(dim, &[6], 3, rng)?;
            let clips = random_clips(n, dim, 2.0, rng);
            let label = argmax(&clip_scores(&clf, &clips[0])?);
            let video = SyntheticVideo { video_id: 0, label, sections: vec![clips], planted: vec![None] };
            let inst = Self { obs, clf, video };
            if inst.probs()?.iter().all(|&p| p >= MIN_ACTION_PROB) {
                return Ok(inst);
            }
        }
    }

    fn clips(&self) -> &[ClipFeature] {
        &self.video.sections[0]
    }

    pub fn rewards(&self, cfg: &RewardConfig) -> Result<Vec<f64>> {
        self.clips().iter().map(|c| Ok(reward(&clip_scores(&self.clf, c)?, self.video.label, cfg)?)).collect()
    }

    pub fn probs(&self) -> Result<Vec<f64>> {
        Ok(section_probs(&self.obs, self.clips())?.0)
    }

    /// `∇ log p_a` for every action `a`.
    pub fn score_functions(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.clips().len();
        (0..n).map(|a| Ok(policy_logprob_grad(&self.obs, self.clips(), &SelectionAction::new(n, a))?.flat())).collect()
    }

    pub fn greedy(&self) -> Result<usize> {
        Ok(greedy_action(&section_probs(&self.obs, self.clips())?).chosen)
    }

    /// `Σ_a p_a w_a ∇ log p_a`.
    pub fn enumerate(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let p = self.probs()?;
        let scores = self.score_functions()?;
        let mut out = vec![0.0; self.obs.num_params()];
        for ((pa, wa), g) in p.iter().zip(weights).zip(&scores) {
            for (o, gi) in out.iter_mut().zip(g) {
                *o += pa * wa * gi;
            }
        }
        Ok(out)
    }
}

fn section_instances(instances: usize, seed: u64) -> Result<Vec<SectionInstance>> {
    let mut rng = Prng::new(seed).substream("enumeration");
    (0..instances).map(|i| SectionInstance::random(2 + i % 3, &mut rng)).collect()
}

/// `E_A[R(B) ∇ log π(A)]` by exact enumeration; must vanish.
pub fn baseline_enumeration(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let cfg = RewardConfig::default();
    let mut worst = 0.0f64;
    for inst in section_instances(instances, seed)? {
        let rewards = inst.rewards(&cfg)?;
        let rb = rewards[inst.greedy()?];
        let n = rewards.len();
        let g = inst.enumerate(&vec![rb; n])?;
        worst = g.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(CheckOutcome::new(
        "baseline term has zero expectation (enumeration)",
        worst,
        ENUMERATION_TOLERANCE,
        format!("{instances} instances, max |component| {worst:.3e}"),
    ))
}

/// Monte Carlo mean of the with-baseline estimator, drawn through the
/// trainer, against the enumerated `∇ E[R]`. The statistic is the largest
/// per-component deviation in standard errors.
pub fn baseline_monte_carlo(instances: usize, draws: usize, seed: u64) -> Result<CheckOutcome> {
    let cfg = RewardConfig::default();
    let mut worst = 0.0f64;
    let mut rng = Prng::new(seed).substream("monte-carlo");
    for inst in section_instances(instances, seed)? {
        let exact = inst.enumerate(&inst.rewards(&cfg)?)?;
        let k = exact.len();
        let mut sum = vec![0.0; k];
        let mut sumsq = vec![0.0; k];
        for _ in 0..draws {
            let (g, _) = policy_gradient(&inst.video, &inst.obs, &inst.clf, &cfg, Baseline::Greedy, &mut rng)?;
            for ((s, q), v) in sum.iter_mut().zip(sumsq.iter_mut()).zip(g.flat()) {
                *s += v;
                *q += v * v;
            }
        }
        let d = draws as f64;
        for i in 0..k {
            let mean = sum[i] / d;
            let var = (sumsq[i] / d - mean * mean).max(0.0) * d / (d - 1.0);
            let se = (var / d).sqrt();
            let dev = (mean - exact[i]).abs();
            let z = if se > 0.0 { dev / se } else if dev <= 1e-12 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    Ok(CheckOutcome::new(
        "with-baseline Monte Carlo gradient matches enumeration",
        worst,
        MC_SIGMAS,
        format!("{instances} instances x {draws} draws, max deviation {worst:.2} standard errors"),
    ))
}

/// Expected reward `Σ_a p_a R(a)` against its Monte Carlo estimate.
pub fn expected_reward_monte_carlo(instances: usize, draws: usize, seed: u64) -> Result<CheckOutcome> {
    let cfg = RewardConfig::default();
    let mut rng = Prng::new(seed).substream("expected-reward");
    let mut worst = 0.0f64;
    for inst in section_instances(instances, seed)? {
        let rewards = inst.rewards(&cfg)?;
        let p = inst.probs()?;
        let exact: f64 = p.iter().zip(&rewards).map(|(a, b)| a * b).sum();
        let (mut s, mut q) = (0.0, 0.0);
        for _ in 0..draws {
            let a = dsn_core::sampler::sample_action(&dsn_core::sampler::SectionProbs(p.clone()), &mut rng).chosen;
            s += rewards[a];
            q += rewards[a] * rewards[a];
        }
        let d = draws as f64;
        let mean = s / d;
        let se = ((q / d - mean * mean).max(0.0) / (d - 1.0)).sqrt();
        let dev = (mean - exact).abs();
        worst = worst.max(if se > 0.0 { dev / se } else if dev <= 1e-12 { 0.0 } else { f64::INFINITY });
    }
    Ok(CheckOutcome::new(
        "expected reward: enumeration vs Monte Carlo",
        worst,
        MC_SIGMAS,
        format!("{instances} instances x {draws} draws, max deviation {worst:.2} standard errors"),
    ))
}

/// Trace of the empirical covariance of the per-video gradient estimator,
/// without and with the greedy baseline. Both estimators see the same videos
/// and the same sampled actions.
pub fn variance_traces(
    videos: &[SyntheticVideo],
    obs: &ObservationNet,
    clf: &ClipClassifier,
    cfg: &RewardConfig,
    samples: usize,
    rng: &mut Prng,
) -> Result<(f64, f64)> {
    let k = obs.num_params();
    let mut acc = [(vec![0.0; k], vec![0.0; k]), (vec![0.0; k], vec![0.0; k])];
    for _ in 0..samples {
        let video = &videos[rng.below(videos.len())];
        let fork = rng.clone();
        for (slot, baseline) in acc.iter_mut().zip([Baseline::None, Baseline::Greedy]) {
            let mut draw = fork.clone();
            let (g, _) = policy_gradient(video, obs, clf, cfg, baseline, &mut draw)?;
            for ((s, q), v) in slot.0.iter_mut().zip(slot.1.iter_mut()).zip(g.flat()) {
                *s += v;
                *q += v * v;
            }
            *rng = draw;
        }
    }
    let d = samples as f64;
    let trace = |(s, q): &(Vec<f64>, Vec<f64>)| -> f64 {
        s.iter().zip(q).map(|(s, q)| (q / d - (s / d) * (s / d)) * d / (d - 1.0)).sum()
    };
    Ok((trace(&acc[0]), trace(&acc[1])))
}

/// Clip `[1]` is class 0 with certainty, clip `[-1]` is class 1.
pub fn sign_classifier() -> ClipClassifier {
    let net = Mlp::from_layers(vec![Layer {
        weight: Mat::from_vec(2, 1, vec![1000.0, -1000.0]).expect("2x1"),
        bias: vec![0.0; 2],
        activation: Activation::Identity,
    }])
    .expect("single identity layer");
    ClipClassifier { net }
}

/// Two-arm bandit: the good arm earns 1, the other `-γ`. Returns
/// `p(good)` after `steps` plain ascent steps at rate `lr`.
pub fn bandit_p_good(seed: u64, steps: usize, lr: f64) -> Result<f64> {
    let mut rng = Prng::new(seed);
    let mut obs = ObservationNet::new(&ObservationShape::new(1, 2), &mut rng)?;
    let clf = sign_classifier();
    let video = SyntheticVideo { video_id: 0, label: 0, sections: vec![vec![vec![1.0], vec![-1.0]]], planted: vec![Some(0)] };
    let cfg = RewardConfig::default();
    let mut state = SgdState::new(&obs, lr, 0.0, 0.0)?;
    for _ in 0..steps {
        policy_gradient_step(&video, &mut obs, &clf, &cfg, &mut state, &mut rng)?;
    }
    Ok(section_probs(&obs, &video.sections[0])?.probs()[0])
}

/// The `gradcheck` command's suite.
pub fn gradcheck_suite(seed: u64, c: Corruption) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        classifier_gradcheck(100, seed, c)?,
        policy_gradcheck(100, seed, c)?,
        baseline_enumeration(20, seed)?,
        baseline_monte_carlo(20, 100_000, seed)?,
        expected_reward_monte_carlo(20, 100_000, seed)?,
    ])
}
