//! `dsnlab` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use dsn_core::eval::{eval_policy, eval_rng, selection_rows, sweep_m, train_max_response, EvalModels, MetricsReport};
use dsn_core::synth::{generate_dataset, Dataset};
use dsn_core::trainer::{pretrain_classifier, selection_hit_rate, train_dsn_with, DsnModel, EpochLog};
use dsn_core::Prng;

use crate::checkpoint::{read_bundle, write_bundle, ModelBundle};
use crate::checks::{gradcheck_suite, Corruption};
use crate::config::ExperimentConfig;
use crate::dataset_io::{read_dataset, write_dataset};
use crate::error::{LabError, Result};
use crate::report::{
    metrics_csv, metrics_json, predictions_csv, selections_csv, sweep_dat, train_log_line, write_atomic,
    TRAIN_LOG_HEADER,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Gen,
    Train,
    Eval,
    Sweep,
    Gradcheck,
}

#[derive(Clone, Debug, Parser)]
#[command(name = "dsnlab", version, about = "Dynamic section-based clip sampling experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment config (`key = value` lines). Optional for gradcheck.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint to write (train) or read (eval, sweep).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Freeze the classifier after pretraining.
    #[arg(long)]
    pub fix_classifier: bool,
    /// Overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides both `epochs` and `pretrain_epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

pub const DATASET_FILE: &str = "dataset.bin";
pub const MODEL_FILE: &str = "model.ckpt";

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| LabError::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(e) = cli.epochs {
        cfg.set_epochs(e);
    }
    if cli.fix_classifier {
        cfg.train.fix_classifier = true;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen => cmd_gen(&load_config(cli)?, out),
        Command::Train => cmd_train(&load_config(cli)?, cli.checkpoint.as_deref(), out),
        Command::Eval => cmd_eval(&load_config(cli)?, cli.checkpoint.as_deref(), out),
        Command::Sweep => cmd_sweep(&load_config(cli)?, cli.checkpoint.as_deref(), out),
        Command::Gradcheck => {
            let seed = match (cli.seed, &cli.config) {
                (Some(s), _) => s,
                (None, Some(_)) => load_config(cli)?.seed,
                (None, None) => 0,
            };
            cmd_gradcheck(seed, Corruption { gradient: cli.corrupt_gradient }, out)
        }
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| LabError::io("<stdout>", e))
}

pub fn cmd_gen(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let data = generate_dataset(&cfg.dataset, &mut Prng::new(cfg.seed).substream("dataset"))?;
    let path = cfg.out_dir.join(DATASET_FILE);
    let hash = write_dataset(&data, &path)?;
    say(out, format!("wrote {}", path.display()))?;
    say(out, format!("sha256 {hash}"))
}

fn load_matching_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let data = read_dataset(&cfg.out_dir.join(DATASET_FILE))?;
    let (a, b) = (&data.spec, &cfg.dataset);
    let geometry = |s: &dsn_core::synth::DatasetSpec| (s.num_classes, s.sections, s.clips_per_section, s.feature_dim);
    if geometry(a) != geometry(b) {
        return Err(LabError::Config(format!(
            "dataset has J={} M={} N={} D={}, config has J={} M={} N={} D={}",
            a.num_classes, a.sections, a.clips_per_section, a.feature_dim,
            b.num_classes, b.sections, b.clips_per_section, b.feature_dim
        )));
    }
    Ok(data)
}

/// Pretraining, the max-response scorer and alternating training, as run by
/// `train`. `on_epoch` receives each log entry with a snapshot of all nets.
pub fn train_bundle<F>(data: &Dataset, cfg: &ExperimentConfig, mut on_epoch: F) -> Result<ModelBundle>
where
    F: FnMut(&EpochLog, &ModelBundle) -> Result<()>,
{
    let mut model = DsnModel::init(data, &cfg.arch, cfg.seed)?;
    pretrain_classifier(data, &cfg.train, &mut model.clf)?;
    let baseline = model.clf.clone();
    let response = train_max_response(data, &cfg.train, &cfg.response_hidden)?;
    let mut failure = None;
    train_dsn_with(data, &cfg.train, &mut model, |log, m| {
        if failure.is_none() {
            let snapshot = ModelBundle { model: m.clone(), baseline: baseline.clone(), response: response.clone() };
            failure = on_epoch(log, &snapshot).err();
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(ModelBundle { model, baseline, response }),
    }
}

pub fn cmd_train(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let data = load_matching_dataset(cfg)?;
    let start = Instant::now();
    let mut log = String::from(TRAIN_LOG_HEADER);
    log.push('\n');
    let snapshots = cfg.out_dir.join("checkpoints");
    let bundle = train_bundle(&data, cfg, |entry, snapshot| {
        log.push_str(&train_log_line(entry, start.elapsed().as_millis()));
        let done = entry.epoch + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            write_bundle(snapshot, &snapshots.join(format!("epoch_{done:04}.ckpt")))?;
        }
        Ok(())
    })?;
    let path = checkpoint.map_or_else(|| cfg.out_dir.join(MODEL_FILE), Path::to_path_buf);
    write_bundle(&bundle, &path)?;
    let log_path = cfg.out_dir.join("train_log.csv");
    write_atomic(&log_path, log.as_bytes())?;
    say(out, format!("wrote {}", path.display()))?;
    say(out, format!("wrote {}", log_path.display()))?;
    if let Ok(h) = selection_hit_rate(&data.test, &bundle.model.obs) {
        say(out, format!("held-out selection hit-rate {h:.4}"))?;
    }
    say(out, format!("trained in {} ms", start.elapsed().as_millis()))
}

fn load_for_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(Dataset, ModelBundle)> {
    let data = load_matching_dataset(cfg)?;
    let path = checkpoint.map_or_else(|| cfg.out_dir.join(MODEL_FILE), Path::to_path_buf);
    let bundle = read_bundle(&path)?;
    let s = &data.spec;
    bundle.check_dims(s.feature_dim, s.clips_per_section, s.num_classes)?;
    Ok((data, bundle))
}

fn models(bundle: &ModelBundle) -> EvalModels<'_> {
    EvalModels {
        obs: Some(&bundle.model.obs),
        clf: &bundle.model.clf,
        baseline: Some(&bundle.baseline),
        response: Some(&bundle.response),
    }
}

/// Every configured policy at every configured `M_test` on the test split.
pub fn evaluate(cfg: &ExperimentConfig, data: &Dataset, bundle: &ModelBundle) -> Result<Vec<MetricsReport>> {
    let m = models(bundle);
    let mut rows = Vec::new();
    for &mt in &cfg.m_test {
        for &p in &cfg.policies {
            rows.push(eval_policy(&data.test, p, &m, mt, cfg.fusion, &mut eval_rng(cfg.seed))?);
        }
    }
    Ok(rows)
}

fn print_rows(rows: &[MetricsReport], out: &mut dyn Write) -> Result<()> {
    for r in rows {
        say(out, dsn_core::eval::describe(r))?;
    }
    Ok(())
}

pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let (data, bundle) = load_for_eval(cfg, checkpoint)?;
    let rows = evaluate(cfg, &data, &bundle)?;
    let dir = &cfg.out_dir;
    write_atomic(&dir.join("metrics.csv"), metrics_csv(&rows, cfg.seed).as_bytes())?;
    let json = serde_json::to_string_pretty(&metrics_json(&rows, cfg.seed)).expect("plain values");
    write_atomic(&dir.join("metrics.json"), json.as_bytes())?;
    write_atomic(&dir.join("predictions.csv"), predictions_csv(&rows).as_bytes())?;
    let selections = selection_rows(&data.test, &bundle.model.obs)?;
    write_atomic(&dir.join("selections.csv"), selections_csv(&selections).as_bytes())?;
    print_rows(&rows, out)?;
    say(out, format!("wrote metrics.csv, metrics.json, predictions.csv, selections.csv in {}", dir.display()))
}

pub fn cmd_sweep(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let (data, bundle) = load_for_eval(cfg, checkpoint)?;
    let rows = sweep_m(&data.test, &models(&bundle), &cfg.sweep_m_test, &cfg.policies, cfg.fusion, cfg.seed)?;
    let dir = &cfg.out_dir;
    write_atomic(&dir.join("sweep.csv"), metrics_csv(&rows, cfg.seed).as_bytes())?;
    for &p in &cfg.policies {
        write_atomic(&dir.join(format!("sweep_{}.dat", p.name())), sweep_dat(&rows, p).as_bytes())?;
    }
    print_rows(&rows, out)?;
    say(out, format!("wrote sweep.csv and {} sweep_<policy>.dat files in {}", cfg.policies.len(), dir.display()))
}

pub fn cmd_gradcheck(seed: u64, corruption: Corruption, out: &mut dyn Write) -> Result<()> {
    let outcomes = gradcheck_suite(seed, corruption)?;
    let mut failed = Vec::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        say(out, format!("{status} {}: {} (tolerance {:e})", o.name, o.detail, o.tolerance))?;
        if !o.passed {
            failed.push(o.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(LabError::Check(failed.join("; ")))
    }
}
