//! Alternating optimization of the classifier and the selection policy.
//!
//! Each section is a one-step contextual bandit over its `N` clips. The
//! sampled action `A` earns `R(A)`: the correct-class score when the chosen
//! clip is classified correctly, `-γ` otherwise. The greedy action `B` is
//! scored the same way and serves as baseline, so the per-section gradient
//! estimate is `(R(A) - R(B)) ∇ log p_A`. Section estimates are summed and
//! applied as one ascent step per video.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::classifier::{clip_scores, train_classifier_step, ClipClassifier};
use crate::error::{ensure, Result};
use crate::nn::argmax;
use crate::optim::{sgd_step, step_decay, Direction, SgdState};
use crate::rng::Prng;
use crate::sampler::{
    greedy_action, policy_logprob_grad, sample_action, section_probs, select_clips, ObservationGrad,
    ObservationNet, ObservationShape, SelectionAction, SelectionMode,
};
use crate::synth::{ClipFeature, Dataset, SyntheticVideo};

/// What the reward of a section's choice is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RewardTarget {
    /// The chosen clip's own class distribution.
    #[default]
    Clip,
    /// The fused video distribution with this section's clip swapped in.
    Video,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardConfig {
    pub gamma: f64,
    pub target: RewardTarget,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { gamma: 0.2, target: RewardTarget::Clip }
    }
}

/// `probs[label]` if `label` is the argmax (ties low), else `-γ`.
pub fn reward(probs: &[f64], label: usize, cfg: &RewardConfig) -> Result<f64> {
    ensure!(label < probs.len(), Contract, "label {label} out of range for {} classes", probs.len());
    Ok(if argmax(probs) == label { probs[label] } else { -cfg.gamma })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionReward {
    pub sampled: usize,
    pub greedy: usize,
    pub reward_sampled: f64,
    pub reward_greedy: f64,
}

impl SectionReward {
    pub fn advantage(&self) -> f64 {
        self.reward_sampled - self.reward_greedy
    }
}

/// Per-section rewards of one policy update.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardRecord {
    pub sections: Vec<SectionReward>,
}

/// Whether the score-function estimate subtracts the greedy reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    None,
    Greedy,
}

/// Network sizes for a full model.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub encoder_hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub classifier_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { encoder_hidden: vec![8], embedding_dim: 4, classifier_hidden: vec![64] }
    }
}

/// Observation network plus classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct DsnModel {
    pub obs: ObservationNet,
    pub clf: ClipClassifier,
}

impl DsnModel {
    /// Glorot init from the `"init"` substream of `seed`: encoder, head, then
    /// classifier.
    pub fn init(dataset: &Dataset, arch: &Architecture, seed: u64) -> Result<Self> {
        let spec = &dataset.spec;
        let mut rng = Prng::new(seed).substream("init");
        let shape = ObservationShape {
            feature_dim: spec.feature_dim,
            encoder_hidden: arch.encoder_hidden.clone(),
            embedding_dim: arch.embedding_dim,
            clips_per_section: spec.clips_per_section,
        };
        let obs = ObservationNet::new(&shape, &mut rng)?;
        let clf = ClipClassifier::new(spec.feature_dim, &arch.classifier_hidden, spec.num_classes, &mut rng)?;
        Ok(Self { obs, clf })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub sections: usize,
    pub clips_per_section: usize,
    /// Freeze the classifier after pretraining.
    pub fix_classifier: bool,
    pub policy_lr: f64,
    pub policy_momentum: f64,
    pub classifier_lr: f64,
    pub classifier_momentum: f64,
    pub weight_decay: f64,
    /// Epochs at which both learning rates drop by 10x.
    pub lr_decay_epochs: Vec<usize>,
    pub reward: RewardConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for a dataset with `sections x clips_per_section` grids.
    pub fn new(sections: usize, clips_per_section: usize) -> Self {
        Self {
            epochs: 30,
            pretrain_epochs: 200,
            sections,
            clips_per_section,
            fix_classifier: false,
            policy_lr: 3e-4,
            policy_momentum: 0.9,
            classifier_lr: 1e-4,
            classifier_momentum: 0.9,
            weight_decay: 1e-5,
            lr_decay_epochs: Vec::new(),
            reward: RewardConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.policy_lr > 0.0 && self.policy_lr.is_finite(),
            Config,
            "policy learning rate must be > 0, got {}",
            self.policy_lr
        );
        ensure!(
            self.classifier_lr >= 0.0 && self.classifier_lr.is_finite(),
            Config,
            "classifier learning rate must be >= 0, got {}",
            self.classifier_lr
        );
        ensure!(
            self.reward.gamma > 0.0 && self.reward.gamma.is_finite(),
            Config,
            "gamma must be > 0, got {}",
            self.reward.gamma
        );
        ensure!(self.sections >= 1 && self.clips_per_section >= 1, Config, "M and N must be >= 1");
        Ok(())
    }

    fn check_against(&self, dataset: &Dataset, model: &DsnModel) -> Result<()> {
        self.validate()?;
        let spec = &dataset.spec;
        ensure!(
            spec.sections == self.sections && spec.clips_per_section == self.clips_per_section,
            Config,
            "training scheme {}:{} does not match dataset {}:{}",
            self.sections,
            self.clips_per_section,
            spec.sections,
            spec.clips_per_section
        );
        ensure!(
            model.obs.clips_per_section() == spec.clips_per_section && model.obs.feature_dim() == spec.feature_dim,
            Config,
            "observation network expects {} clips of dim {}, dataset has {} of dim {}",
            model.obs.clips_per_section(),
            model.obs.feature_dim(),
            spec.clips_per_section,
            spec.feature_dim
        );
        ensure!(
            model.clf.feature_dim() == spec.feature_dim && model.clf.num_classes() == spec.num_classes,
            Config,
            "classifier is {} -> {}, dataset is {} -> {}",
            model.clf.feature_dim(),
            model.clf.num_classes(),
            spec.feature_dim,
            spec.num_classes
        );
        Ok(())
    }
}

struct SectionDraw {
    sampled: SelectionAction,
    greedy: SelectionAction,
}

/// Policy-gradient estimate for one video without touching any parameters.
///
/// Actions are drawn section by section from `rng`, one draw per section.
pub fn policy_gradient(
    video: &SyntheticVideo,
    obs: &ObservationNet,
    clf: &ClipClassifier,
    cfg: &RewardConfig,
    baseline: Baseline,
    rng: &mut Prng,
) -> Result<(ObservationGrad, RewardRecord)> {
    let draws = video
        .sections
        .iter()
        .map(|clips| {
            let p = section_probs(obs, clips)?;
            let sampled = sample_action(&p, rng);
            let greedy = greedy_action(&p);
            Ok(SectionDraw { sampled, greedy })
        })
        .collect::<Result<Vec<_>>>()?;

    let record = score_draws(video, clf, cfg, &draws)?;
    let mut grad = obs.zero_grad();
    for ((clips, draw), rec) in video.sections.iter().zip(&draws).zip(&record.sections) {
        let coef = match baseline {
            Baseline::Greedy => rec.advantage(),
            Baseline::None => rec.reward_sampled,
        };
        if coef != 0.0 {
            grad.add_scaled(&policy_logprob_grad(obs, clips, &draw.sampled)?, coef);
        }
    }
    Ok((grad, record))
}

fn score_draws(
    video: &SyntheticVideo,
    clf: &ClipClassifier,
    cfg: &RewardConfig,
    draws: &[SectionDraw],
) -> Result<RewardRecord> {
    let label = video.label;
    let scored = video
        .sections
        .iter()
        .zip(draws)
        .map(|(clips, d)| {
            let ps = clip_scores(clf, &clips[d.sampled.chosen])?;
            let pg = if d.greedy.chosen == d.sampled.chosen {
                ps.clone()
            } else {
                clip_scores(clf, &clips[d.greedy.chosen])?
            };
            Ok((ps, pg))
        })
        .collect::<Result<Vec<_>>>()?;

    let sections = match cfg.target {
        RewardTarget::Clip => scored
            .iter()
            .zip(draws)
            .map(|((ps, pg), d)| {
                Ok(SectionReward {
                    sampled: d.sampled.chosen,
                    greedy: d.greedy.chosen,
                    reward_sampled: reward(ps, label, cfg)?,
                    reward_greedy: reward(pg, label, cfg)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        RewardTarget::Video => {
            let m = scored.len() as f64;
            let classes = scored[0].0.len();
            let mut fused = vec![0.0; classes];
            for (ps, _) in &scored {
                fused.iter_mut().zip(ps).for_each(|(f, p)| *f += p / m);
            }
            scored
                .iter()
                .zip(draws)
                .map(|((ps, pg), d)| {
                    let swapped: Vec<f64> = fused
                        .iter()
                        .zip(ps)
                        .zip(pg)
                        .map(|((f, a), b)| f - a / m + b / m)
                        .collect();
                    Ok(SectionReward {
                        sampled: d.sampled.chosen,
                        greedy: d.greedy.chosen,
                        reward_sampled: reward(&fused, label, cfg)?,
                        reward_greedy: reward(&swapped, label, cfg)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(RewardRecord { sections })
}

/// One ascent step on `Θ` from a single video; `Φ` is read only.
pub fn policy_gradient_step(
    video: &SyntheticVideo,
    obs: &mut ObservationNet,
    clf: &ClipClassifier,
    cfg: &RewardConfig,
    state: &mut SgdState,
    rng: &mut Prng,
) -> Result<RewardRecord> {
    let (grad, record) = policy_gradient(video, obs, clf, cfg, Baseline::Greedy, rng)?;
    sgd_step(obs, &grad, state, Direction::Maximize)?;
    Ok(record)
}

/// Per-epoch training summary.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean regularized classifier loss; `None` when the classifier is frozen.
    pub classifier_loss: Option<f64>,
    pub mean_advantage: f64,
    /// Fraction of planted sections where the greedy choice hit the planted
    /// clip, measured before each policy update.
    pub hit_rate: f64,
}

fn shuffled_order(n: usize, rng: &mut Prng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
}

/// Trains the classifier alone on one uniformly random clip per section,
/// fused by averaging. Uses the `"pretrain"` substream of `cfg.seed`.
pub fn pretrain_classifier(dataset: &Dataset, cfg: &TrainConfig, clf: &mut ClipClassifier) -> Result<Vec<f64>> {
    fit_on_random_clips(dataset, cfg, clf, "pretrain")
}

pub(crate) fn fit_on_random_clips(
    dataset: &Dataset,
    cfg: &TrainConfig,
    clf: &mut ClipClassifier,
    stream: &str,
) -> Result<Vec<f64>> {
    ensure!(
        clf.feature_dim() == dataset.spec.feature_dim && clf.num_classes() == dataset.spec.num_classes,
        Config,
        "classifier shape does not match dataset"
    );
    let mut rng = Prng::new(cfg.seed).substream(stream);
    let mut state = SgdState::new(&clf.net, cfg.classifier_lr, cfg.classifier_momentum, cfg.weight_decay)?;
    let mut losses = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 0..cfg.pretrain_epochs {
        state.learning_rate = step_decay(cfg.classifier_lr, epoch, &cfg.lr_decay_epochs, 10.0);
        let mut total = 0.0;
        for i in shuffled_order(dataset.train.len(), &mut rng) {
            let video = &dataset.train[i];
            let clips: Vec<&ClipFeature> = video.sections.iter().map(|s| &s[rng.below(s.len())]).collect();
            total += train_classifier_step(clf, &clips, video.label, &mut state)?;
        }
        losses.push(total / dataset.train.len() as f64);
    }
    Ok(losses)
}

/// Alternating training. See [`train_dsn_with`].
pub fn train_dsn(dataset: &Dataset, cfg: &TrainConfig, model: &mut DsnModel) -> Result<Vec<EpochLog>> {
    train_dsn_with(dataset, cfg, model, |_, _| {})
}

/// Alternating training, calling `on_epoch` after every epoch.
///
/// Per epoch, training videos are visited in an order reshuffled from the
/// `"data"` substream. For each video: unless the classifier is fixed, clips
/// are sampled from the current policy and `Φ` takes one SGD step on the
/// fused loss; then `Θ` takes one policy-gradient step against the updated
/// classifier. Policy draws come from the `"policy"` substream.
pub fn train_dsn_with<F>(dataset: &Dataset, cfg: &TrainConfig, model: &mut DsnModel, mut on_epoch: F) -> Result<Vec<EpochLog>>
where
    F: FnMut(&EpochLog, &DsnModel),
{
    cfg.check_against(dataset, model)?;
    let root = Prng::new(cfg.seed);
    let mut data_rng = root.substream("data");
    let mut policy_rng = root.substream("policy");
    let mut clf_state = SgdState::new(&model.clf.net, cfg.classifier_lr, cfg.classifier_momentum, cfg.weight_decay)?;
    let mut policy_state = SgdState::new(&model.obs, cfg.policy_lr, cfg.policy_momentum, 0.0)?;

    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        clf_state.learning_rate = step_decay(cfg.classifier_lr, epoch, &cfg.lr_decay_epochs, 10.0);
        policy_state.learning_rate = step_decay(cfg.policy_lr, epoch, &cfg.lr_decay_epochs, 10.0);
        let mut loss_total = 0.0;
        let mut adv_total = 0.0;
        let mut adv_count = 0usize;
        let mut hits = 0usize;
        let mut planted = 0usize;
        for i in shuffled_order(dataset.train.len(), &mut data_rng) {
            let video = &dataset.train[i];
            if !cfg.fix_classifier {
                let (clips, _) = select_clips(video, &model.obs, SelectionMode::Stochastic, &mut policy_rng)?;
                loss_total += train_classifier_step(&mut model.clf, &clips, video.label, &mut clf_state)?;
            }
            let record = policy_gradient_step(
                video,
                &mut model.obs,
                &model.clf,
                &cfg.reward,
                &mut policy_state,
                &mut policy_rng,
            )?;
            for (sec, target) in record.sections.iter().zip(&video.planted) {
                adv_total += sec.advantage();
                adv_count += 1;
                if let Some(t) = target {
                    planted += 1;
                    hits += usize::from(sec.greedy == *t);
                }
            }
        }
        let log = EpochLog {
            epoch,
            classifier_loss: (!cfg.fix_classifier).then(|| loss_total / dataset.train.len() as f64),
            mean_advantage: adv_total / adv_count.max(1) as f64,
            hit_rate: if planted == 0 { 0.0 } else { hits as f64 / planted as f64 },
        };
        on_epoch(&log, model);
        logs.push(log);
    }
    Ok(logs)
}

/// Greedy-selection hit-rate against the planted clips. Background sections
/// are skipped; returns `(hits, planted_sections)`.
pub fn selection_hits(videos: &[SyntheticVideo], obs: &ObservationNet) -> Result<(usize, usize)> {
    let mut hits = 0;
    let mut total = 0;
    for v in videos {
        for (clips, target) in v.sections.iter().zip(&v.planted) {
            if let Some(t) = target {
                total += 1;
                hits += usize::from(greedy_action(&section_probs(obs, clips)?).chosen == *t);
            }
        }
    }
    Ok((hits, total))
}

pub fn selection_hit_rate(videos: &[SyntheticVideo], obs: &ObservationNet) -> Result<f64> {
    let (hits, total) = selection_hits(videos, obs)?;
    ensure!(total > 0, Contract, "{}", format!("no planted sections among {} videos", videos.len()));
    Ok(hits as f64 / total as f64)
}
