//! Section-based clip selection.
//!
//! The observation network encodes each clip of a section with a shared
//! encoder, concatenates the embeddings in clip order and maps them through a
//! single linear head to one logit per clip. A softmax over the logits gives
//! the selection distribution `P^m`. The policy maker turns it into a one-hot
//! action: sampled while training, argmax at test time.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::nn::{argmax, softmax, Activation, Mlp, MlpGrad, Trace};
use crate::params::Parameters;
use crate::rng::Prng;
use crate::synth::{ClipFeature, SyntheticVideo};

/// Encoder widths and clip count for an [`ObservationNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationShape {
    pub feature_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub clips_per_section: usize,
}

impl ObservationShape {
    /// Default sizing: one hidden layer of 8, embedding 4. Keeps one encoder
    /// pass near a tenth of the default classifier's cost.
    pub fn new(feature_dim: usize, clips_per_section: usize) -> Self {
        Self { feature_dim, encoder_hidden: vec![8], embedding_dim: 4, clips_per_section }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationNet {
    pub encoder: Mlp,
    pub head: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationGrad {
    pub encoder: MlpGrad,
    pub head: MlpGrad,
}

impl ObservationNet {
    pub fn new(shape: &ObservationShape, rng: &mut Prng) -> Result<Self> {
        let mut dims = vec![shape.feature_dim];
        dims.extend_from_slice(&shape.encoder_hidden);
        dims.push(shape.embedding_dim);
        let encoder = Mlp::glorot(&dims, rng)?;
        let head = Mlp::glorot(
            &[shape.embedding_dim * shape.clips_per_section, shape.clips_per_section],
            rng,
        )?;
        Self::from_parts(encoder, head)
    }

    /// Checks that the head is one identity layer over `N` concatenated
    /// embeddings.
    pub fn from_parts(encoder: Mlp, head: Mlp) -> Result<Self> {
        let n = head.output_dim();
        ensure!(
            head.layers().len() == 1 && head.layers()[0].activation == Activation::Identity,
            Contract,
            "observation head must be a single identity layer"
        );
        ensure!(
            head.input_dim() == n * encoder.output_dim(),
            Contract,
            "head input {} != clips {} x embedding {}",
            head.input_dim(),
            n,
            encoder.output_dim()
        );
        Ok(Self { encoder, head })
    }

    pub fn clips_per_section(&self) -> usize {
        self.head.output_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn zero_grad(&self) -> ObservationGrad {
        ObservationGrad { encoder: self.encoder.zero_grad(), head: self.head.zero_grad() }
    }

    fn forward(&self, clips: &[ClipFeature]) -> Result<(Vec<Trace>, Trace)> {
        let n = self.clips_per_section();
        ensure!(clips.len() == n, Contract, "section has {} clips, network expects {n}", clips.len());
        let encoded = clips.iter().map(|c| self.encoder.forward(c)).collect::<Result<Vec<_>>>()?;
        let concat: Vec<f64> = encoded.iter().flat_map(|t| t.output().iter().copied()).collect();
        let head = self.head.forward(&concat)?;
        Ok((encoded, head))
    }

    /// Head logits for one section.
    pub fn logits(&self, clips: &[ClipFeature]) -> Result<Vec<f64>> {
        let (_, head) = self.forward(clips)?;
        Ok(head.output().to_vec())
    }
}

impl Parameters for ObservationNet {
    fn buffers(&self) -> Vec<&[f64]> {
        let mut b = self.encoder.buffers();
        b.extend(self.head.buffers());
        b
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut b = self.encoder.buffers_mut();
        b.extend(self.head.buffers_mut());
        b
    }
}

impl Parameters for ObservationGrad {
    fn buffers(&self) -> Vec<&[f64]> {
        let mut b = self.encoder.buffers();
        b.extend(self.head.buffers());
        b
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut b = self.encoder.buffers_mut();
        b.extend(self.head.buffers_mut());
        b
    }
}

impl ObservationGrad {
    pub fn add_scaled(&mut self, other: &ObservationGrad, k: f64) {
        self.encoder.add_scaled(&other.encoder, k);
        self.head.add_scaled(&other.head, k);
    }
}

/// Selection distribution over the clips of one section.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionProbs(pub Vec<f64>);

impl SectionProbs {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One-hot clip choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionAction {
    pub one_hot: Vec<u8>,
    pub chosen: usize,
}

impl SelectionAction {
    pub fn new(n: usize, chosen: usize) -> Self {
        let mut one_hot = vec![0u8; n];
        one_hot[chosen] = 1;
        Self { one_hot, chosen }
    }
}

pub fn section_probs(net: &ObservationNet, clips: &[ClipFeature]) -> Result<SectionProbs> {
    Ok(SectionProbs(softmax(&net.logits(clips)?)))
}

/// Inverse-CDF categorical draw over indices in order.
pub fn sample_action(p: &SectionProbs, rng: &mut Prng) -> SelectionAction {
    let u = rng.uniform();
    let mut cum = 0.0;
    let mut chosen = p.len() - 1;
    for (i, &pi) in p.probs().iter().enumerate() {
        cum += pi;
        if u < cum {
            chosen = i;
            break;
        }
    }
    // rounding can leave the tail short of 1; never land on a zero-mass clip
    while p.probs()[chosen] == 0.0 && chosen > 0 {
        chosen -= 1;
    }
    SelectionAction::new(p.len(), chosen)
}

/// Argmax action; ties go to the lowest index.
pub fn greedy_action(p: &SectionProbs) -> SelectionAction {
    SelectionAction::new(p.len(), argmax(p.probs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    Stochastic,
    Greedy,
}

/// Choice made for one section.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionChoice {
    pub probs: SectionProbs,
    pub action: SelectionAction,
}

/// One clip per section, each section decided independently.
pub fn select_clips<'v>(
    video: &'v SyntheticVideo,
    net: &ObservationNet,
    mode: SelectionMode,
    rng: &mut Prng,
) -> Result<(Vec<&'v ClipFeature>, Vec<SectionChoice>)> {
    let mut selected = Vec::with_capacity(video.sections.len());
    let mut choices = Vec::with_capacity(video.sections.len());
    for clips in &video.sections {
        let probs = section_probs(net, clips)?;
        let action = match mode {
            SelectionMode::Stochastic => sample_action(&probs, rng),
            SelectionMode::Greedy => greedy_action(&probs),
        };
        selected.push(&clips[action.chosen]);
        choices.push(SectionChoice { probs, action });
    }
    Ok((selected, choices))
}

/// Gradient of `log p_chosen` with respect to every observation parameter.
///
/// At the logits this is `one_hot - probs`; it is backpropagated through the
/// head and then through each of the `N` tied encoder applications, whose
/// contributions are summed.
pub fn policy_logprob_grad(
    net: &ObservationNet,
    clips: &[ClipFeature],
    action: &SelectionAction,
) -> Result<ObservationGrad> {
    let n = net.clips_per_section();
    ensure!(
        action.one_hot.len() == n && action.chosen < n && action.one_hot.iter().map(|&a| a as usize).sum::<usize>() == 1
            && action.one_hot[action.chosen] == 1,
        Contract,
        "action is not a valid one-hot over {n} clips"
    );
    let (encoded, head_trace) = net.forward(clips)?;
    let probs = softmax(head_trace.output());
    let dlogits: Vec<f64> = probs
        .iter()
        .zip(&action.one_hot)
        .map(|(p, &a)| f64::from(a) - p)
        .collect();
    let mut grad = net.zero_grad();
    let dconcat = net.head.backward_into(&head_trace, &dlogits, &mut grad.head)?;
    let e = net.encoder.output_dim();
    for (i, trace) in encoded.iter().enumerate() {
        net.encoder.backward_into(trace, &dconcat[i * e..(i + 1) * e], &mut grad.encoder)?;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, Mat};

    /// Encoder = 1-dim clip mean, head = identity over the N means.
    fn mean_net(dim: usize, n: usize) -> ObservationNet {
        let encoder = Mlp::from_layers(vec![Layer {
            weight: Mat::from_vec(1, dim, vec![1.0 / dim as f64; dim]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        let head = Mlp::from_layers(vec![Layer { weight: Mat::identity(n), bias: vec![0.0; n], activation: Activation::Identity }])
            .unwrap();
        ObservationNet::from_parts(encoder, head).unwrap()
    }

    fn random_clips(n: usize, dim: usize, rng: &mut Prng) -> Vec<ClipFeature> {
        (0..n).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect()
    }

    #[test]
    fn mean_encoder_closed_form() {
        let net = mean_net(2, 3);
        let l2 = libm::log(2.0);
        let l3 = libm::log(3.0);
        let clips = vec![vec![0.0, 0.0], vec![l2, l2], vec![l3 - 0.5, l3 + 0.5]];
        let p = section_probs(&net, &clips).unwrap();
        for (v, e) in p.probs().iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        }
    }

    #[test]
    fn tied_head_identical_clips_uniform() {
        let mut rng = Prng::new(8);
        let encoder = Mlp::glorot(&[5, 6, 3], &mut rng).unwrap();
        // every head row has the same weights on every clip block
        let block: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let w: Vec<f64> = (0..4).flat_map(|_| (0..4).flat_map(|_| block.clone())).collect();
        let head = Mlp::from_layers(vec![Layer {
            weight: Mat::from_vec(4, 12, w).unwrap(),
            bias: vec![0.0; 4],
            activation: Activation::Identity,
        }])
        .unwrap();
        let net = ObservationNet::from_parts(encoder, head).unwrap();
        let clip: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let p = section_probs(&net, &vec![clip; 4]).unwrap();
        assert!(p.probs().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn fresh_net_gives_valid_distribution() {
        let mut rng = Prng::new(1);
        let net = ObservationNet::new(&ObservationShape::new(6, 3), &mut rng).unwrap();
        let p = section_probs(&net, &random_clips(3, 6, &mut rng)).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.probs().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn wrong_shapes_rejected() {
        let mut rng = Prng::new(1);
        let net = ObservationNet::new(&ObservationShape::new(6, 3), &mut rng).unwrap();
        assert!(section_probs(&net, &random_clips(2, 6, &mut rng)).is_err());
        assert!(section_probs(&net, &random_clips(3, 5, &mut rng)).is_err());
    }

    #[test]
    fn degenerate_distribution_always_first() {
        let p = SectionProbs(vec![1.0, 0.0, 0.0]);
        let mut rng = Prng::new(3);
        for _ in 0..1000 {
            assert_eq!(sample_action(&p, &mut rng).chosen, 0);
        }
    }

    #[test]
    fn fair_coin_frequency() {
        let p = SectionProbs(vec![0.5, 0.5]);
        let mut rng = Prng::new(4);
        let n = 100_000;
        let zeros = (0..n).filter(|_| sample_action(&p, &mut rng).chosen == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 3.0 * libm::sqrt(0.25 / n as f64), "{freq}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = SectionProbs(vec![0.2, 0.3, 0.5]);
        let mut a = Prng::new(10);
        let mut b = a.clone();
        let xs: Vec<usize> = (0..100).map(|_| sample_action(&p, &mut a).chosen).collect();
        let ys: Vec<usize> = (0..100).map(|_| sample_action(&p, &mut b).chosen).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_action(&SectionProbs(vec![0.2, 0.5, 0.3])).chosen, 1);
        assert_eq!(greedy_action(&SectionProbs(vec![0.5, 0.5])).chosen, 0);
        let a = greedy_action(&SectionProbs(vec![0.2, 0.5, 0.3]));
        assert_eq!(a.one_hot, vec![0, 1, 0]);
    }

    #[test]
    fn greedy_invariant_under_monotone_logit_transform() {
        let mut rng = Prng::new(6);
        for _ in 0..200 {
            let z: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
            let t: Vec<f64> = z.iter().map(|v| 3.0 * v * v * v + 2.0 * v - 1.0).collect();
            assert_eq!(
                greedy_action(&SectionProbs(softmax(&z))).chosen,
                greedy_action(&SectionProbs(softmax(&t))).chosen
            );
        }
    }

    #[test]
    fn logit_gradient_closed_form() {
        // head identity, encoder mean: grad of log p_0 at the logits
        let net = mean_net(1, 3);
        let clips = vec![vec![0.0], vec![0.0], vec![0.0]];
        let g = policy_logprob_grad(&net, &clips, &SelectionAction::new(3, 0)).unwrap();
        // head bias gradient equals the logit gradient
        let b = &g.head.layers[0].bias;
        for (v, e) in b.iter().zip([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn score_function_expectation_is_zero() {
        let mut rng = Prng::new(21);
        let net = ObservationNet::new(&ObservationShape::new(4, 3), &mut rng).unwrap();
        let clips = random_clips(3, 4, &mut rng);
        let p = section_probs(&net, &clips).unwrap();
        let mut acc = net.zero_grad();
        for a in 0..3 {
            let g = policy_logprob_grad(&net, &clips, &SelectionAction::new(3, a)).unwrap();
            acc.add_scaled(&g, p.probs()[a]);
        }
        assert!(acc.flat().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn logprob_grad_matches_finite_differences() {
        let mut rng = Prng::new(22);
        for _ in 0..10 {
            let net = ObservationNet::new(&ObservationShape::new(4, 3), &mut rng).unwrap();
            let clips = random_clips(3, 4, &mut rng);
            let chosen = rng.below(3);
            let g = policy_logprob_grad(&net, &clips, &SelectionAction::new(3, chosen)).unwrap().flat();
            let f = |n: &ObservationNet| libm::log(section_probs(n, &clips).unwrap().probs()[chosen]);
            let h = 1e-6;
            let base = net.flat();
            for k in 0..g.len() {
                let mut p = net.clone();
                p.set_flat_entry(k, base[k] + h);
                let mut m = net.clone();
                m.set_flat_entry(k, base[k] - h);
                let numeric = (f(&p) - f(&m)) / (2.0 * h);
                let denom = g[k].abs().max(numeric.abs()).max(1e-3);
                assert!((g[k] - numeric).abs() / denom < 1e-5);
            }
        }
    }

    #[test]
    fn invalid_action_rejected() {
        let net = mean_net(1, 3);
        let clips = vec![vec![0.0], vec![0.0], vec![0.0]];
        let bad = SelectionAction { one_hot: vec![1, 1, 0], chosen: 0 };
        assert!(policy_logprob_grad(&net, &clips, &bad).is_err());
    }
}
