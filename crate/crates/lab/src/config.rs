//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated. Unknown and repeated keys are rejected, and
//! every error names the offending key and its line.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dsn_core::classifier::Fusion;
use dsn_core::eval::Policy;
use dsn_core::synth::DatasetSpec;
use dsn_core::trainer::{Architecture, RewardConfig, RewardTarget, TrainConfig};

use crate::error::{LabError, Result};

/// Every accepted key with its default; `None` marks a required key.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("seed", None),
    ("num_classes", None),
    ("sections", None),
    ("clips_per_section", None),
    ("feature_dim", None),
    ("signal_strength", None),
    ("noise_sigma", None),
    ("background_section_prob", Some("0")),
    ("confuser_prob", Some("0")),
    ("train_count", None),
    ("test_count", None),
    ("encoder_hidden", Some("8")),
    ("embedding_dim", Some("4")),
    ("classifier_hidden", Some("64")),
    ("response_hidden", Some("8")),
    ("epochs", Some("30")),
    ("pretrain_epochs", Some("200")),
    ("policy_lr", Some("0.0003")),
    ("policy_momentum", Some("0.9")),
    ("classifier_lr", Some("0.0001")),
    ("classifier_momentum", Some("0.9")),
    ("weight_decay", Some("0.00001")),
    ("lr_decay_epochs", Some("")),
    ("gamma", Some("0.2")),
    ("reward_target", Some("clip")),
    ("fix_classifier", Some("false")),
    ("checkpoint_every", Some("0")),
    ("m_test", Some("")),
    ("sweep_m_test", Some("")),
    ("policies", Some("dsn,random,uniform,max_response,dense,oracle")),
    ("fusion", Some("probabilities")),
    ("out_dir", Some("dsn_out")),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub arch: Architecture,
    pub response_hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Write an intermediate checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    pub m_test: Vec<usize>,
    pub sweep_m_test: Vec<usize>,
    pub policies: Vec<Policy>,
    pub fusion: Fusion,
    pub out_dir: PathBuf,
}

struct Entry {
    value: String,
    line: usize,
}

struct Fields {
    entries: BTreeMap<String, Entry>,
}

impl Fields {
    fn raw(&self, key: &str) -> Result<(&str, Option<usize>)> {
        if let Some(e) = self.entries.get(key) {
            return Ok((e.value.as_str(), Some(e.line)));
        }
        match KEYS.iter().find(|(k, _)| *k == key) {
            Some((_, Some(default))) => Ok((default, None)),
            _ => Err(LabError::Config(format!("missing required key `{key}`"))),
        }
    }

    fn bad(key: &str, line: Option<usize>, what: impl Display) -> LabError {
        match line {
            Some(l) => LabError::Config(format!("line {l}: key `{key}`: {what}")),
            None => LabError::Config(format!("key `{key}`: {what}")),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let (raw, line) = self.raw(key)?;
        raw.parse().map_err(|e| Self::bad(key, line, format!("cannot parse `{raw}`: {e}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let (raw, line) = self.raw(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Self::bad(key, line, format!("cannot parse `{s}`: {e}"))))
            .collect()
    }

    fn check(&self, key: &str, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            let line = self.entries.get(key).map(|e| e.line);
            Err(Self::bad(key, line, what))
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {line}: expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(LabError::Config(format!("line {line}: unknown key `{key}`")));
            }
            if let Some(prev) = entries.get(key) {
                let Entry { line: first, .. } = prev;
                return Err(LabError::Config(format!("line {line}: key `{key}` already set on line {first}")));
            }
            entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line });
        }
        Self::from_fields(&Fields { entries })
    }

    fn from_fields(f: &Fields) -> Result<Self> {
        let seed: u64 = f.get("seed")?;
        let dataset = DatasetSpec {
            num_classes: f.get("num_classes")?,
            sections: f.get("sections")?,
            clips_per_section: f.get("clips_per_section")?,
            feature_dim: f.get("feature_dim")?,
            signal_strength: f.get("signal_strength")?,
            noise_sigma: f.get("noise_sigma")?,
            background_section_prob: f.get("background_section_prob")?,
            confuser_prob: f.get("confuser_prob")?,
            train_count: f.get("train_count")?,
            test_count: f.get("test_count")?,
            seed,
        };
        dataset.validate()?;

        let arch = Architecture {
            encoder_hidden: f.list("encoder_hidden")?,
            embedding_dim: f.get("embedding_dim")?,
            classifier_hidden: f.list("classifier_hidden")?,
        };
        f.check("embedding_dim", arch.embedding_dim >= 1, "must be >= 1")?;
        f.check("encoder_hidden", arch.encoder_hidden.iter().all(|&w| w >= 1), "widths must be >= 1")?;
        f.check("classifier_hidden", arch.classifier_hidden.iter().all(|&w| w >= 1), "widths must be >= 1")?;
        let response_hidden: Vec<usize> = f.list("response_hidden")?;
        f.check("response_hidden", response_hidden.iter().all(|&w| w >= 1), "widths must be >= 1")?;

        let reward_target = match f.raw("reward_target")?.0 {
            "clip" => RewardTarget::Clip,
            "video" => RewardTarget::Video,
            other => {
                let line = f.raw("reward_target")?.1;
                return Err(Fields::bad("reward_target", line, format!("expected `clip` or `video`, got `{other}`")));
            }
        };
        let gamma: f64 = f.get("gamma")?;
        f.check("gamma", gamma > 0.0 && gamma.is_finite(), "must be > 0")?;
        let train = TrainConfig {
            epochs: f.get("epochs")?,
            pretrain_epochs: f.get("pretrain_epochs")?,
            sections: dataset.sections,
            clips_per_section: dataset.clips_per_section,
            fix_classifier: f.get("fix_classifier")?,
            policy_lr: f.get("policy_lr")?,
            policy_momentum: f.get("policy_momentum")?,
            classifier_lr: f.get("classifier_lr")?,
            classifier_momentum: f.get("classifier_momentum")?,
            weight_decay: f.get("weight_decay")?,
            lr_decay_epochs: f.list("lr_decay_epochs")?,
            reward: RewardConfig { gamma, target: reward_target },
            seed,
        };
        f.check("policy_lr", train.policy_lr > 0.0 && train.policy_lr.is_finite(), "must be > 0")?;
        f.check("classifier_lr", train.classifier_lr >= 0.0 && train.classifier_lr.is_finite(), "must be >= 0")?;
        for key in ["policy_momentum", "classifier_momentum"] {
            let mu: f64 = f.get(key)?;
            f.check(key, (0.0..1.0).contains(&mu), "must lie in [0, 1)")?;
        }
        f.check("weight_decay", train.weight_decay >= 0.0 && train.weight_decay.is_finite(), "must be >= 0")?;

        let m = dataset.sections;
        let mut m_test: Vec<usize> = f.list("m_test")?;
        if m_test.is_empty() {
            m_test.push(m);
        }
        f.check("m_test", m_test.iter().all(|&k| (1..=m).contains(&k)), "entries must lie in 1..=sections")?;
        let mut sweep_m_test: Vec<usize> = f.list("sweep_m_test")?;
        if sweep_m_test.is_empty() {
            sweep_m_test = (1..=m).collect();
        }
        f.check(
            "sweep_m_test",
            sweep_m_test.iter().all(|&k| (1..=m).contains(&k)),
            "entries must lie in 1..=sections",
        )?;
        let policies: Vec<Policy> = f.list("policies")?;
        f.check("policies", !policies.is_empty(), "at least one policy required")?;
        let fusion = match f.raw("fusion")?.0 {
            "probabilities" => Fusion::Probabilities,
            "logits" => Fusion::Logits,
            other => {
                let line = f.raw("fusion")?.1;
                return Err(Fields::bad("fusion", line, format!("expected `probabilities` or `logits`, got `{other}`")));
            }
        };

        Ok(Self {
            seed,
            dataset,
            arch,
            response_hidden,
            train,
            checkpoint_every: f.get("checkpoint_every")?,
            m_test,
            sweep_m_test,
            policies,
            fusion,
            out_dir: PathBuf::from(f.raw("out_dir")?.0),
        })
    }

    /// Replaces the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.dataset.seed = seed;
        self.train.seed = seed;
    }

    /// Sets both the pretraining and the alternating epoch counts.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.train.epochs = epochs;
        self.train.pretrain_epochs = epochs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
seed = 7
num_classes = 10
sections = 2
clips_per_section = 3
feature_dim = 16
signal_strength = 2.0
noise_sigma = 1.0
train_count = 2000
test_count = 1000
";

    fn err(text: &str) -> String {
        match ExperimentConfig::parse(text) {
            Err(LabError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.dataset, DatasetSpec { confuser_prob: 0.0, ..DatasetSpec::standard() });
        assert_eq!(c.train, TrainConfig { seed: 7, ..TrainConfig::new(2, 3) });
        assert_eq!(c.arch, Architecture::default());
        assert_eq!(c.m_test, vec![2]);
        assert_eq!(c.sweep_m_test, vec![1, 2]);
        assert_eq!(c.policies.len(), 6);
    }

    #[test]
    fn comments_lists_and_overrides() {
        let text = format!("{MINIMAL}# a comment\n\nconfuser_prob = 0.2 # trailing\nlr_decay_epochs = 10, 20\npolicies = dsn,dense\nfusion = logits\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.dataset.confuser_prob, 0.2);
        assert_eq!(c.train.lr_decay_epochs, vec![10, 20]);
        assert_eq!(c.policies, vec![Policy::Dsn, Policy::Dense]);
        assert_eq!(c.fusion, Fusion::Logits);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("feature_dim = 16\n", "");
        assert!(err(&text).contains("`feature_dim`"));
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let m = err(&format!("{MINIMAL}bogus = 1\n"));
        assert!(m.contains("`bogus`") && m.contains("line 10"), "{m}");
    }

    #[test]
    fn bad_value_names_key_and_line() {
        let m = err(&MINIMAL.replace("sections = 2", "sections = two"));
        assert!(m.contains("`sections`") && m.contains("line 3"), "{m}");
        let m = err(&format!("{MINIMAL}gamma = -1\n"));
        assert!(m.contains("`gamma`") && m.contains("line 10"), "{m}");
        let m = err(&format!("{MINIMAL}m_test = 3\n"));
        assert!(m.contains("`m_test`"), "{m}");
    }

    #[test]
    fn duplicates_and_garbage_rejected() {
        assert!(err(&format!("{MINIMAL}seed = 8\n")).contains("already set"));
        assert!(err(&format!("{MINIMAL}just words\n")).contains("line 10"));
    }

    #[test]
    fn seed_and_epoch_overrides() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.set_seed(11);
        assert_eq!((c.dataset.seed, c.train.seed), (11, 11));
        c.set_epochs(0);
        assert_eq!((c.train.epochs, c.train.pretrain_epochs), (0, 0));
    }
}
