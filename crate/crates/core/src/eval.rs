//! Sampling-policy comparison: accuracy, mAP and MAC cost.
//!
//! Evaluating at `m_test < M` sections uses the evenly spaced section indices
//! `floor((2k + 1) M / (2 m_test))`, so coverage stays spread over the video.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::classifier::{clip_scores, video_prediction_with, ClipClassifier, Fusion};
use crate::error::{ensure, Error, Result};
use crate::nn::argmax;
use crate::rng::Prng;
use crate::sampler::{greedy_action, section_probs, ObservationNet};
use crate::synth::{ClipFeature, Dataset, SyntheticVideo};
use crate::trainer::{fit_on_random_clips, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// Greedy choice of the trained observation network.
    Dsn,
    /// One uniformly random clip per section.
    Random,
    /// The middle clip `floor(N/2)` of each section.
    Uniform,
    /// Clip with the highest top-class score under a separately trained
    /// lightweight classifier.
    MaxResponse,
    /// All `M x N` clips, fused.
    Dense,
    /// Correct iff any single clip of the video is classified correctly.
    Oracle,
    /// Per section, the clip with the highest true-class score; then fused.
    OracleFused,
}

impl Policy {
    pub const ALL: [Policy; 7] = [
        Policy::Dsn,
        Policy::Random,
        Policy::Uniform,
        Policy::MaxResponse,
        Policy::Dense,
        Policy::Oracle,
        Policy::OracleFused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Dsn => "dsn",
            Policy::Random => "random",
            Policy::Uniform => "uniform",
            Policy::MaxResponse => "max_response",
            Policy::Dense => "dense",
            Policy::Oracle => "oracle",
            Policy::OracleFused => "oracle_fused",
        }
    }

    /// Policies that pick exactly one clip per evaluated section.
    pub fn is_single_clip(self) -> bool {
        matches!(self, Policy::Dsn | Policy::Random | Policy::Uniform | Policy::MaxResponse | Policy::OracleFused)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown policy `{s}`")))
    }
}

/// Per-clip MAC counts, read off the instantiated networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub encoder: u64,
    pub head: u64,
    pub classifier: u64,
    /// Lightweight scorer used by max-response; falls back to `encoder`.
    pub response: Option<u64>,
}

impl CostModel {
    pub fn from_nets(obs: &ObservationNet, clf: &ClipClassifier, response: Option<&ClipClassifier>) -> Self {
        Self {
            encoder: obs.encoder.macs(),
            head: obs.head.macs(),
            classifier: clf.net.macs(),
            response: response.map(|r| r.net.macs()),
        }
    }
}

/// MACs per video. `m` and `n` are the full grid, `m_test` the evaluated
/// sections.
pub fn cost_of(policy: Policy, cost: &CostModel, m: usize, n: usize, m_test: usize) -> u64 {
    let (m, n, mt) = (m as u64, n as u64, m_test as u64);
    match policy {
        Policy::Dsn => mt * n * cost.encoder + mt * cost.head + mt * cost.classifier,
        Policy::MaxResponse => mt * n * cost.response.unwrap_or(cost.encoder) + mt * cost.classifier,
        Policy::Random | Policy::Uniform => mt * cost.classifier,
        Policy::Dense | Policy::Oracle => m * n * cost.classifier,
        Policy::OracleFused => mt * n * cost.classifier,
    }
}

pub fn clips_used(policy: Policy, m: usize, n: usize, m_test: usize) -> usize {
    match policy {
        Policy::Dense | Policy::Oracle => m * n,
        Policy::OracleFused => m_test * n,
        _ => m_test,
    }
}

/// Evenly spaced section indices for `m_test` of `m` sections.
pub fn section_indices(m: usize, m_test: usize) -> Result<Vec<usize>> {
    ensure!(
        (1..=m).contains(&m_test),
        Config,
        "M_test must lie in 1..={m}, got {m_test}"
    );
    Ok((0..m_test).map(|k| (2 * k + 1) * m / (2 * m_test)).collect())
}

/// Networks available to the harness.
#[derive(Clone, Copy, Debug)]
pub struct EvalModels<'a> {
    pub obs: Option<&'a ObservationNet>,
    /// Classifier trained jointly with the policy; scores DSN selections.
    pub clf: &'a ClipClassifier,
    /// Pretrained classifier shared by every non-DSN policy. When absent
    /// they use `clf`.
    pub baseline: Option<&'a ClipClassifier>,
    pub response: Option<&'a ClipClassifier>,
}

impl<'a> EvalModels<'a> {
    pub fn classifier_for(&self, policy: Policy) -> &'a ClipClassifier {
        match policy {
            Policy::Dsn => self.clf,
            _ => self.baseline.unwrap_or(self.clf),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoOutcome {
    pub video_id: u64,
    pub label: usize,
    pub predicted: usize,
    /// Fused class scores; absent for the clip-level oracle.
    pub fused: Option<Vec<f64>>,
    /// Whether any clip this policy looked at is individually correct.
    pub clip_hit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub policy: Policy,
    pub m_test: usize,
    pub n: usize,
    pub top1: f64,
    /// Reported only when there are at least 10 classes.
    pub top5: Option<f64>,
    /// Not applicable for the clip-level oracle.
    pub map: Option<f64>,
    /// Classes without positives, left out of the mAP mean.
    pub map_excluded: Vec<usize>,
    pub cost_macs: u64,
    pub clips_used: usize,
    pub videos: Vec<VideoOutcome>,
}

fn in_top_k(scores: &[f64], label: usize, k: usize) -> bool {
    // rank = classes strictly ahead of `label` under (score desc, index asc)
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > scores[label] || (s == scores[label] && i < label))
        .count();
    ahead < k
}

fn selected_clip<'v>(
    policy: Policy,
    clips: &'v [ClipFeature],
    label: usize,
    models: &EvalModels<'_>,
    rng: &mut Prng,
) -> Result<&'v ClipFeature> {
    let idx = match policy {
        Policy::Dsn => {
            let obs = models.obs.ok_or_else(|| Error::Config("dsn policy needs an observation network".into()))?;
            greedy_action(&section_probs(obs, clips)?).chosen
        }
        Policy::Random => rng.below(clips.len()),
        Policy::Uniform => clips.len() / 2,
        Policy::MaxResponse => {
            let resp = models
                .response
                .ok_or_else(|| Error::Config("max_response policy needs a trained response network".into()))?;
            let peaks = clips
                .iter()
                .map(|c| Ok(clip_scores(resp, c)?.into_iter().fold(f64::NEG_INFINITY, f64::max)))
                .collect::<Result<Vec<_>>>()?;
            argmax(&peaks)
        }
        Policy::OracleFused => {
            let truth = clips
                .iter()
                .map(|c| Ok(clip_scores(models.classifier_for(policy), c)?[label]))
                .collect::<Result<Vec<_>>>()?;
            argmax(&truth)
        }
        Policy::Dense | Policy::Oracle => unreachable!("multi-clip policy"),
    };
    Ok(&clips[idx])
}

fn evaluate_video(
    video: &SyntheticVideo,
    policy: Policy,
    sections: &[usize],
    models: &EvalModels<'_>,
    fusion: Fusion,
    top_k: Option<usize>,
    rng: &mut Prng,
) -> Result<(VideoOutcome, bool)> {
    let label = video.label;
    let clips: Vec<&ClipFeature> = match policy {
        Policy::Dense | Policy::Oracle => video.sections.iter().flatten().collect(),
        _ => sections
            .iter()
            .map(|&m| selected_clip(policy, &video.sections[m], label, models, rng))
            .collect::<Result<Vec<_>>>()?,
    };
    let pred = video_prediction_with(models.classifier_for(policy), &clips, fusion)?;
    let clip_hit = pred.clip_probs.iter().any(|p| argmax(p) == label);
    if policy == Policy::Oracle {
        let top = top_k.is_some_and(|k| pred.clip_probs.iter().any(|p| in_top_k(p, label, k)));
        let predicted = if clip_hit { label } else { argmax(&pred.clip_probs[0]) };
        let outcome = VideoOutcome { video_id: video.video_id, label, predicted, fused: None, clip_hit };
        return Ok((outcome, top));
    }
    let top = top_k.is_some_and(|k| in_top_k(&pred.fused, label, k));
    let outcome = VideoOutcome {
        video_id: video.video_id,
        label,
        predicted: pred.predicted,
        fused: Some(pred.fused),
        clip_hit,
    };
    Ok((outcome, top))
}

/// Scores one policy on `videos`, visited in `video_id` order whatever the
/// slice order.
pub fn eval_policy(
    videos: &[SyntheticVideo],
    policy: Policy,
    models: &EvalModels<'_>,
    m_test: usize,
    fusion: Fusion,
    rng: &mut Prng,
) -> Result<MetricsReport> {
    ensure!(!videos.is_empty(), Contract, "no videos to evaluate");
    let m = videos[0].num_sections();
    let n = videos[0].clips_per_section();
    let sections = section_indices(m, m_test)?;
    let classes = models.clf.num_classes();
    match policy {
        Policy::Dsn => ensure!(models.obs.is_some(), Config, "dsn policy needs an observation network"),
        Policy::MaxResponse => ensure!(models.response.is_some(), Config, "max_response policy needs a trained response network"),
        _ => {}
    }
    let top_k = (classes >= 10).then_some(5);

    let mut order: Vec<&SyntheticVideo> = videos.iter().collect();
    order.sort_by_key(|v| v.video_id);
    let mut outcomes = Vec::with_capacity(videos.len());
    let mut top5_hits = 0usize;
    for v in order {
        ensure!(
            v.num_sections() == m && v.clips_per_section() == n,
            Contract,
            "video {} grid differs from the first video",
            v.video_id
        );
        let (outcome, top) = evaluate_video(v, policy, &sections, models, fusion, top_k, rng)?;
        top5_hits += usize::from(top);
        outcomes.push(outcome);
    }
    let total = videos.len() as f64;
    let top1 = outcomes.iter().filter(|o| o.predicted == o.label).count() as f64 / total;
    let (map, map_excluded) = if policy == Policy::Oracle {
        (None, Vec::new())
    } else {
        let scored: Vec<(u64, &[f64])> =
            outcomes.iter().map(|o| (o.video_id, o.fused.as_deref().unwrap_or_default())).collect();
        let labels: Vec<usize> = outcomes.iter().map(|o| o.label).collect();
        let r = compute_map(&scored, &labels, classes)?;
        (r.map, r.excluded)
    };
    let cost = CostModel::from_nets_opt(models, policy);
    Ok(MetricsReport {
        policy,
        m_test,
        n,
        top1,
        top5: top_k.map(|_| top5_hits as f64 / total),
        map,
        map_excluded,
        cost_macs: cost_of(policy, &cost, m, n, m_test),
        clips_used: clips_used(policy, m, n, m_test),
        videos: outcomes,
    })
}

impl CostModel {
    fn from_nets_opt(models: &EvalModels<'_>, policy: Policy) -> Self {
        Self {
            encoder: models.obs.map_or(0, |o| o.encoder.macs()),
            head: models.obs.map_or(0, |o| o.head.macs()),
            classifier: models.classifier_for(policy).net.macs(),
            response: models.response.map(|r| r.net.macs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapResult {
    /// `None` when no class has a positive.
    pub map: Option<f64>,
    pub excluded: Vec<usize>,
}

/// Mean over classes of average precision.
///
/// For class `c`, videos are ranked by `scores[c]` descending, ties by
/// video id ascending; AP is the mean precision at the ranks of the
/// positives. Classes with no positives are excluded and listed.
pub fn compute_map(scores: &[(u64, &[f64])], labels: &[usize], num_classes: usize) -> Result<MapResult> {
    ensure!(scores.len() == labels.len(), Contract, "scores and labels differ in length");
    ensure!(
        scores.iter().all(|(_, s)| s.len() == num_classes),
        Contract,
        "every score vector needs {num_classes} entries"
    );
    ensure!(labels.iter().all(|&l| l < num_classes), Contract, "label out of range");
    let mut aps = Vec::with_capacity(num_classes);
    let mut excluded = Vec::new();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    for c in 0..num_classes {
        if !labels.contains(&c) {
            excluded.push(c);
            continue;
        }
        order.sort_by(|&a, &b| {
            scores[b].1[c]
                .partial_cmp(&scores[a].1[c])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(scores[a].0.cmp(&scores[b].0))
        });
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        for (rank, &i) in order.iter().enumerate() {
            if labels[i] == c {
                hits += 1;
                precision_sum += hits as f64 / (rank + 1) as f64;
            }
        }
        aps.push(precision_sum / hits as f64);
    }
    let map = (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64);
    Ok(MapResult { map, excluded })
}

/// Independently trained lightweight classifier for the max-response
/// policy: `feature_dim -> hidden.. -> classes`, fit like the pretraining
/// stage on random clips.
pub fn train_max_response(dataset: &Dataset, cfg: &TrainConfig, hidden: &[usize]) -> Result<ClipClassifier> {
    let spec = &dataset.spec;
    let mut rng = Prng::new(cfg.seed).substream("response-init");
    let mut clf = ClipClassifier::new(spec.feature_dim, hidden, spec.num_classes, &mut rng)?;
    fit_on_random_clips(dataset, cfg, &mut clf, "response")?;
    Ok(clf)
}

/// Fresh evaluation stream for one (policy, m_test) cell.
pub fn eval_rng(seed: u64) -> Prng {
    Prng::new(seed).substream("eval")
}

/// Every policy at every `m_test`, rows ordered by `m_test` then policy.
pub fn sweep_m(
    videos: &[SyntheticVideo],
    models: &EvalModels<'_>,
    m_range: &[usize],
    policies: &[Policy],
    fusion: Fusion,
    seed: u64,
) -> Result<Vec<MetricsReport>> {
    let mut rows = Vec::with_capacity(m_range.len() * policies.len());
    for &mt in m_range {
        for &p in policies {
            rows.push(eval_policy(videos, p, models, mt, fusion, &mut eval_rng(seed))?);
        }
    }
    Ok(rows)
}

/// One line of the selection-confidence dump.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRow {
    pub video_id: u64,
    pub section: usize,
    pub clip: usize,
    pub prob: f64,
    pub chosen: bool,
    pub planted: bool,
}

/// Greedy selection probabilities for every clip of every section.
pub fn selection_rows(videos: &[SyntheticVideo], obs: &ObservationNet) -> Result<Vec<SelectionRow>> {
    let mut rows = Vec::new();
    for v in videos {
        for (m, clips) in v.sections.iter().enumerate() {
            let p = section_probs(obs, clips)?;
            let chosen = greedy_action(&p).chosen;
            for (n, &prob) in p.probs().iter().enumerate() {
                rows.push(SelectionRow {
                    video_id: v.video_id,
                    section: m,
                    clip: n,
                    prob,
                    chosen: n == chosen,
                    planted: v.planted[m] == Some(n),
                });
            }
        }
    }
    Ok(rows)
}

/// Hit-rate recomputed from dump rows: chosen and planted coincide, over
/// sections that have a planted clip.
pub fn hit_rate_from_rows(rows: &[SelectionRow]) -> Option<f64> {
    let planted = rows.iter().filter(|r| r.planted).count();
    let hits = rows.iter().filter(|r| r.planted && r.chosen).count();
    (planted > 0).then(|| hits as f64 / planted as f64)
}

/// Human-readable one-line summary.
pub fn describe(r: &MetricsReport) -> String {
    alloc::format!(
        "{:<13} M_test={} top1={:.4} cost={} clips={}",
        r.policy.name(),
        r.m_test,
        r.top1,
        r.cost_macs,
        r.clips_used
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::sampler::{ObservationShape, SelectionMode};
    use crate::synth::{generate_dataset, DatasetSpec};
    use crate::trainer::{Architecture, DsnModel};

    fn data(n: usize) -> Dataset {
        let spec = DatasetSpec { clips_per_section: n, train_count: 40, test_count: 40, ..DatasetSpec::standard() };
        generate_dataset(&spec, &mut Prng::new(1)).unwrap()
    }

    #[test]
    fn map_examples() {
        let perfect: Vec<(u64, &[f64])> = vec![(0, &[0.9, 0.1]), (1, &[0.8, 0.2]), (2, &[0.1, 0.9])];
        let r = compute_map(&perfect, &[0, 0, 1], 2).unwrap();
        assert_eq!(r.map, Some(1.0));
        // one positive ranked second of two: precision 1/2
        let s: Vec<(u64, &[f64])> = vec![(0, &[0.9]), (1, &[0.4])];
        let r = compute_map(&s, &[1, 0], 2);
        assert!(r.is_err());
        let s: Vec<(u64, &[f64])> = vec![(0, &[0.9, 0.1]), (1, &[0.4, 0.6])];
        let r = compute_map(&s, &[1, 1], 2).unwrap();
        // class 0 has no positives; class 1 ranking: video 1 (0.6) then 0 (0.1), both positive
        assert_eq!(r.excluded, vec![0]);
        assert_eq!(r.map, Some(1.0));
        let s: Vec<(u64, &[f64])> = vec![(0, &[0.7, 0.3]), (1, &[0.6, 0.4])];
        let r = compute_map(&s, &[0, 0], 2).unwrap();
        assert_eq!(r.map, Some(1.0));
        let s: Vec<(u64, &[f64])> = vec![(0, &[0.3, 0.7]), (1, &[0.6, 0.4])];
        let r = compute_map(&s, &[0, 1], 2).unwrap();
        // class 0: video 1 (negative) first, video 0 second -> 0.5; class 1 likewise
        assert_eq!(r.map, Some(0.5));
    }

    #[test]
    fn map_tie_breaks_by_video_id() {
        let s: Vec<(u64, &[f64])> = vec![(5, &[0.5, 0.5]), (2, &[0.5, 0.5])];
        let r = compute_map(&s, &[0, 1], 2).unwrap();
        // both classes rank video 2 first: class 1 AP 1, class 0 AP 0.5
        assert_eq!(r.map, Some(0.75));
    }

    #[test]
    fn section_indices_spread_evenly() {
        assert_eq!(section_indices(2, 2).unwrap(), vec![0, 1]);
        assert_eq!(section_indices(2, 1).unwrap(), vec![1]);
        assert_eq!(section_indices(8, 4).unwrap(), vec![1, 3, 5, 7]);
        assert!(section_indices(2, 3).is_err());
        assert!(section_indices(2, 0).is_err());
    }

    #[test]
    fn cost_examples() {
        let c = CostModel { encoder: 160, head: 36, classifier: 1664, response: None };
        assert_eq!(cost_of(Policy::Dense, &c, 2, 3, 2), 6 * 1664);
        assert_eq!(cost_of(Policy::Random, &c, 2, 3, 2), 2 * 1664);
        assert_eq!(cost_of(Policy::Dsn, &c, 2, 3, 2), 6 * 160 + 2 * 36 + 2 * 1664);
        assert!(c.encoder + c.head < 2 * c.classifier);
        assert!(cost_of(Policy::Dsn, &c, 2, 3, 2) < cost_of(Policy::Dense, &c, 2, 3, 2));
    }

    #[test]
    fn default_nets_cost_ratio() {
        let d = data(3);
        let m = DsnModel::init(&d, &Architecture::default(), 0).unwrap();
        let c = CostModel::from_nets(&m.obs, &m.clf, None);
        assert_eq!(c.encoder, 16 * 8 + 8 * 4);
        assert_eq!(c.head, 12 * 3);
        assert_eq!(c.classifier, 16 * 64 + 64 * 10);
        let ratio = cost_of(Policy::Dsn, &c, 2, 3, 2) as f64 / cost_of(Policy::Dense, &c, 2, 3, 2) as f64;
        assert!(ratio <= 0.45, "{ratio}");
    }

    #[test]
    fn single_clip_sections_collapse_policies() {
        let d = data(1);
        let arch = Architecture::default();
        let mut rng = Prng::new(2);
        let obs = ObservationNet::new(
            &ObservationShape {
                feature_dim: 16,
                encoder_hidden: arch.encoder_hidden.clone(),
                embedding_dim: 4,
                clips_per_section: 1,
            },
            &mut rng,
        )
        .unwrap();
        let clf = ClipClassifier::new(16, &[64], 10, &mut rng).unwrap();
        let models = EvalModels { obs: Some(&obs), clf: &clf, baseline: None, response: None };
        let reports: Vec<_> = [Policy::Dsn, Policy::Random, Policy::Uniform, Policy::Dense]
            .iter()
            .map(|&p| eval_policy(&d.test, p, &models, 2, Fusion::Probabilities, &mut eval_rng(3)).unwrap())
            .collect();
        for r in &reports[1..] {
            assert_eq!(r.videos, reports[0].videos);
        }
    }

    #[test]
    fn oracle_covers_every_clip_hit_and_prerequisites_checked() {
        let d = data(3);
        let m = DsnModel::init(&d, &Architecture::default(), 4).unwrap();
        let models = EvalModels { obs: Some(&m.obs), clf: &m.clf, baseline: None, response: None };
        let oracle = eval_policy(&d.test, Policy::Oracle, &models, 2, Fusion::Probabilities, &mut eval_rng(1)).unwrap();
        assert_eq!(oracle.map, None);
        for p in [Policy::Dsn, Policy::Random, Policy::Uniform] {
            let r = eval_policy(&d.test, p, &models, 2, Fusion::Probabilities, &mut eval_rng(1)).unwrap();
            for (a, o) in r.videos.iter().zip(&oracle.videos) {
                assert!(!a.clip_hit || o.clip_hit);
            }
        }
        let bare = EvalModels { obs: None, clf: &m.clf, baseline: None, response: None };
        assert!(matches!(
            eval_policy(&d.test, Policy::Dsn, &bare, 2, Fusion::Probabilities, &mut eval_rng(1)),
            Err(Error::Config(_))
        ));
        assert!(eval_policy(&d.test, Policy::MaxResponse, &bare, 2, Fusion::Probabilities, &mut eval_rng(1)).is_err());
    }

    #[test]
    fn top1_matches_outcomes_and_sweep_shape() {
        let d = data(3);
        let m = DsnModel::init(&d, &Architecture::default(), 5).unwrap();
        let models = EvalModels { obs: Some(&m.obs), clf: &m.clf, baseline: None, response: None };
        let policies = [Policy::Dsn, Policy::Random, Policy::Dense];
        let rows = sweep_m(&d.test, &models, &[1, 2], &policies, Fusion::Probabilities, 9).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            let recomputed = r.videos.iter().filter(|v| v.predicted == v.label).count() as f64 / r.videos.len() as f64;
            assert_eq!(r.top1, recomputed);
            assert!(r.top5.is_some());
        }
        let dense: Vec<_> = rows.iter().filter(|r| r.policy == Policy::Dense).collect();
        assert_eq!(dense[0].top1, dense[1].top1);
        assert_eq!(dense[0].cost_macs, dense[1].cost_macs);
    }

    #[test]
    fn dump_rows_are_consistent() {
        let d = data(3);
        let m = DsnModel::init(&d, &Architecture::default(), 6).unwrap();
        let rows = selection_rows(&d.test, &m.obs).unwrap();
        for chunk in rows.chunks(3) {
            let s: f64 = chunk.iter().map(|r| r.prob).sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert_eq!(chunk.iter().filter(|r| r.chosen).count(), 1);
        }
        let from_trainer = crate::trainer::selection_hit_rate(&d.test, &m.obs).unwrap();
        assert_eq!(hit_rate_from_rows(&rows), Some(from_trainer));
        let (sel, _) = crate::sampler::select_clips(&d.test[0], &m.obs, SelectionMode::Greedy, &mut Prng::new(0)).unwrap();
        assert_eq!(sel.len(), 2);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("bogus".parse::<Policy>().is_err());
    }

    #[test]
    fn top_k_rank_rule() {
        assert!(in_top_k(&[0.1, 0.5, 0.4], 2, 2));
        assert!(!in_top_k(&[0.1, 0.5, 0.4], 0, 2));
        assert!(!in_top_k(&[0.5, 0.5], 1, 1));
    }
}
