//! Synthetic labeled videos with planted discriminative clips.
//!
//! A video of class `j` is an `M x N` grid of clip feature vectors. Each
//! section is either a background section (probability `β`) or carries one
//! planted clip `s·sig_j + noise` at a uniformly drawn index. Every other
//! clip is a confuser `s·sig_k + noise` for a random `k != j` with
//! probability `κ`, otherwise pure `N(0, σ²)` noise.
//!
//! Draw order (fixed so the stream is reproducible):
//! 1. class signatures, class by class: `D` normals, then normalized;
//! 2. train videos then test videos, ids `0..train+test`, label `id mod J`;
//! 3. per section: one uniform for the background test, one `below(N)` for
//!    the planted index (drawn even for background sections);
//! 4. per clip in index order: non-planted clips draw one uniform for the
//!    confuser test and, if it fires, one `below(J-1)` for the class; then
//!    `D` normals of noise.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::rng::Prng;

pub type ClipFeature = Vec<f64>;

/// Generator parameters. Field order is the on-disk header order.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub num_classes: usize,
    pub sections: usize,
    pub clips_per_section: usize,
    pub feature_dim: usize,
    pub signal_strength: f64,
    pub noise_sigma: f64,
    pub background_section_prob: f64,
    pub confuser_prob: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl DatasetSpec {
    /// The reference configuration used throughout the benchmarks.
    pub fn standard() -> Self {
        Self {
            num_classes: 10,
            sections: 2,
            clips_per_section: 3,
            feature_dim: 16,
            signal_strength: 2.0,
            noise_sigma: 1.0,
            background_section_prob: 0.0,
            confuser_prob: 0.2,
            train_count: 2000,
            test_count: 1000,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.num_classes >= 2, Config, "num_classes must be >= 2, got {}", self.num_classes);
        ensure!(self.sections >= 1, Config, "sections must be >= 1");
        ensure!(self.clips_per_section >= 1, Config, "clips_per_section must be >= 1");
        ensure!(self.feature_dim >= 1, Config, "feature_dim must be >= 1");
        ensure!(
            self.signal_strength >= 0.0 && self.signal_strength.is_finite(),
            Config,
            "signal_strength must be finite and >= 0, got {}",
            self.signal_strength
        );
        ensure!(
            self.noise_sigma > 0.0 && self.noise_sigma.is_finite(),
            Config,
            "noise_sigma must be > 0, got {}",
            self.noise_sigma
        );
        ensure!(
            (0.0..1.0).contains(&self.background_section_prob),
            Config,
            "background_section_prob must lie in [0, 1), got {}",
            self.background_section_prob
        );
        ensure!(
            (0.0..1.0).contains(&self.confuser_prob),
            Config,
            "confuser_prob must lie in [0, 1), got {}",
            self.confuser_prob
        );
        ensure!(self.train_count >= 1, Config, "train_count must be >= 1");
        ensure!(self.test_count >= 1, Config, "test_count must be >= 1");
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVideo {
    pub video_id: u64,
    pub label: usize,
    /// `sections[m][n]` is clip `n` of section `m`.
    pub sections: Vec<Vec<ClipFeature>>,
    /// Index of the planted clip per section, `None` for background.
    pub planted: Vec<Option<usize>>,
}

impl SyntheticVideo {
    pub fn num_sections(&self) -> usize {
        self.sections.len()
    }

    pub fn clips_per_section(&self) -> usize {
        self.sections.first().map_or(0, Vec::len)
    }

    /// Checks grid dims, planted indices and finiteness against `spec`.
    pub fn validate(&self, spec: &DatasetSpec) -> Result<()> {
        ensure!(self.label < spec.num_classes, Contract, "video {}: label out of range", self.video_id);
        ensure!(
            self.sections.len() == spec.sections && self.planted.len() == spec.sections,
            Contract,
            "video {}: expected {} sections",
            self.video_id,
            spec.sections
        );
        for (sec, planted) in self.sections.iter().zip(&self.planted) {
            ensure!(sec.len() == spec.clips_per_section, Contract, "video {}: bad clip count", self.video_id);
            ensure!(
                planted.is_none_or(|p| p < spec.clips_per_section),
                Contract,
                "video {}: planted index out of range",
                self.video_id
            );
            for clip in sec {
                ensure!(
                    clip.len() == spec.feature_dim && clip.iter().all(|v| v.is_finite()),
                    Contract,
                    "video {}: malformed clip feature",
                    self.video_id
                );
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub signatures: Vec<Vec<f64>>,
    pub train: Vec<SyntheticVideo>,
    pub test: Vec<SyntheticVideo>,
}

fn random_unit_vector(dim: usize, rng: &mut Prng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn noisy(center: Option<&[f64]>, strength: f64, sigma: f64, dim: usize, rng: &mut Prng) -> ClipFeature {
    (0..dim)
        .map(|d| center.map_or(0.0, |c| strength * c[d]) + sigma * rng.normal())
        .collect()
}

fn generate_video(spec: &DatasetSpec, signatures: &[Vec<f64>], video_id: u64, rng: &mut Prng) -> SyntheticVideo {
    let label = (video_id % spec.num_classes as u64) as usize;
    let (n, dim) = (spec.clips_per_section, spec.feature_dim);
    let mut sections = Vec::with_capacity(spec.sections);
    let mut planted = Vec::with_capacity(spec.sections);
    for _ in 0..spec.sections {
        let background = rng.uniform() < spec.background_section_prob;
        let idx = rng.below(n);
        let plant = (!background).then_some(idx);
        let clips = (0..n)
            .map(|c| {
                if plant == Some(c) {
                    return noisy(Some(&signatures[label]), spec.signal_strength, spec.noise_sigma, dim, rng);
                }
                let center = if rng.uniform() < spec.confuser_prob {
                    let k = rng.below(spec.num_classes - 1);
                    let k = if k >= label { k + 1 } else { k };
                    Some(signatures[k].as_slice())
                } else {
                    None
                };
                noisy(center, spec.signal_strength, spec.noise_sigma, dim, rng)
            })
            .collect();
        sections.push(clips);
        planted.push(plant);
    }
    SyntheticVideo { video_id, label, sections, planted }
}

/// Generates the full dataset from `spec`, consuming draws from `rng`.
pub fn generate_dataset(spec: &DatasetSpec, rng: &mut Prng) -> Result<Dataset> {
    spec.validate()?;
    let mut signatures: Vec<Vec<f64>> = Vec::with_capacity(spec.num_classes);
    while signatures.len() < spec.num_classes {
        let sig = random_unit_vector(spec.feature_dim, rng);
        // D = 1 admits only two unit vectors
        ensure!(
            spec.feature_dim > 1 || signatures.len() < 2,
            Config,
            "feature_dim 1 supports at most 2 distinct class signatures"
        );
        if signatures.iter().all(|s| s != &sig) {
            signatures.push(sig);
        }
    }
    let total = (spec.train_count + spec.test_count) as u64;
    let mut videos: Vec<SyntheticVideo> = (0..total).map(|id| generate_video(spec, &signatures, id, rng)).collect();
    let test = videos.split_off(spec.train_count);
    Ok(Dataset { spec: spec.clone(), signatures, train: videos, test })
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        ensure!(
            self.signatures.len() == self.spec.num_classes
                && self.signatures.iter().all(|s| s.len() == self.spec.feature_dim),
            Contract,
            "signature table does not match spec"
        );
        ensure!(
            self.train.len() == self.spec.train_count && self.test.len() == self.spec.test_count,
            Contract,
            "{}",
            format!(
                "video counts {}/{} do not match spec {}/{}",
                self.train.len(),
                self.test.len(),
                self.spec.train_count,
                self.spec.test_count
            )
        );
        for v in self.train.iter().chain(&self.test) {
            v.validate(&self.spec)?;
        }
        Ok(())
    }
}
