use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsn_core::trainer::{Architecture, DsnModel};
use dsnlab::checkpoint::read_bundle;
use dsnlab::dataset_io::read_dataset;

const SMALL: &str = "\
seed = 11
num_classes = 4
sections = 2
clips_per_section = 3
feature_dim = 6
signal_strength = 2.0
noise_sigma = 1.0
background_section_prob = 0.2
train_count = 40
test_count = 24
classifier_hidden = 8
epochs = 2
pretrain_epochs = 3
checkpoint_every = 1
m_test = 1, 2
policies = dsn, random, uniform, max_response, dense, oracle, oracle_fused
";

struct Lab {
    dir: tempfile::TempDir,
}

impl Lab {
    fn new(config: &str) -> Lab {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("lab.conf"), config).unwrap();
        Lab { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn out(&self) -> PathBuf {
        self.path("out")
    }

    fn run(&self, args: &[&str]) -> Output {
        let conf = self.path("lab.conf");
        let out = self.out();
        Command::new(env!("CARGO_BIN_EXE_dsnlab"))
            .args(args)
            .arg("--config")
            .arg(conf)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn gen_is_deterministic_and_prints_hash() {
    let a = Lab::new(SMALL);
    let b = Lab::new(SMALL);
    let sa = a.ok(&["gen"]);
    let sb = b.ok(&["gen"]);
    let hash = |s: &str| s.lines().find_map(|l| l.strip_prefix("sha256 ")).unwrap().to_string();
    assert_eq!(hash(&sa), hash(&sb));
    assert_eq!(
        std::fs::read(a.out().join("dataset.bin")).unwrap(),
        std::fs::read(b.out().join("dataset.bin")).unwrap()
    );
    let other = b.ok(&["gen", "--seed", "12"]);
    assert_ne!(hash(&sa), hash(&other));
}

#[test]
fn missing_required_key_exits_2() {
    let lab = Lab::new(&SMALL.replace("feature_dim = 6\n", ""));
    let o = lab.run(&["gen"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("feature_dim"));
}

#[test]
fn unknown_key_exits_2_with_line() {
    let lab = Lab::new(&format!("{SMALL}learning_rate = 0.1\n"));
    let o = lab.run(&["gen"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("learning_rate") && err.contains("line"), "{err}");
}

#[test]
fn missing_config_file_exits_3() {
    let lab = Lab::new(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_dsnlab"))
        .args(["gen", "--config"])
        .arg(lab.path("nope.conf"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn train_without_dataset_exits_3() {
    let lab = Lab::new(SMALL);
    let o = lab.run(&["train"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset.bin"));
}

#[test]
fn zero_epochs_checkpoint_is_the_initialization() {
    let lab = Lab::new(SMALL);
    lab.ok(&["gen"]);
    lab.ok(&["train", "--epochs", "0"]);
    let data = read_dataset(&lab.out().join("dataset.bin")).unwrap();
    let bundle = read_bundle(&lab.out().join("model.ckpt")).unwrap();
    let arch = Architecture { classifier_hidden: vec![8], ..Architecture::default() };
    let init = DsnModel::init(&data, &arch, 11).unwrap();
    assert_eq!(bundle.model, init);
    assert_eq!(bundle.baseline, init.clf);
    assert_eq!(lab.read("train_log.csv").lines().count(), 1);
}

#[test]
fn eval_with_mismatched_checkpoint_exits_2() {
    let lab = Lab::new(SMALL);
    lab.ok(&["gen"]);
    lab.ok(&["train", "--epochs", "0"]);
    let wide = Lab::new(&SMALL.replace("clips_per_section = 3", "clips_per_section = 4"));
    wide.ok(&["gen"]);
    let ckpt = lab.out().join("model.ckpt");
    let o = wide.run(&["eval", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains('3') && err.contains('4'), "{err}");
}

#[test]
fn dataset_geometry_mismatch_exits_2() {
    let lab = Lab::new(SMALL);
    lab.ok(&["gen"]);
    std::fs::write(lab.path("lab.conf"), SMALL.replace("sections = 2", "sections = 3")).unwrap();
    let o = lab.run(&["train"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn corrupt_checkpoint_exits_3() {
    let lab = Lab::new(SMALL);
    lab.ok(&["gen"]);
    let bad = lab.path("bad.ckpt");
    std::fs::write(&bad, b"DSNCKPT1\x01").unwrap();
    let o = lab.run(&["eval", "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte 8: truncated"));
}

fn trained(extra: &[&str]) -> Lab {
    let lab = Lab::new(SMALL);
    lab.ok(&["gen"]);
    let mut args = vec!["train"];
    args.extend_from_slice(extra);
    lab.ok(&args);
    lab
}

#[test]
fn train_writes_log_and_periodic_checkpoints() {
    let lab = trained(&[]);
    let log = lab.read("train_log.csv");
    assert_eq!(log.lines().next().unwrap(), "epoch,classifier_loss,mean_advantage,hit_rate,wall_ms");
    assert_eq!(log.lines().count(), 3);
    for name in ["epoch_0001.ckpt", "epoch_0002.ckpt"] {
        assert!(lab.out().join("checkpoints").join(name).is_file(), "{name}");
    }
    let last = read_bundle(&lab.out().join("checkpoints/epoch_0002.ckpt")).unwrap();
    assert_eq!(last, read_bundle(&lab.out().join("model.ckpt")).unwrap());
}

#[test]
fn fix_classifier_keeps_pretrained_classifier() {
    let lab = trained(&["--fix-classifier"]);
    let b = read_bundle(&lab.out().join("model.ckpt")).unwrap();
    assert_eq!(b.model.clf, b.baseline);
    let free = trained(&[]);
    let f = read_bundle(&free.out().join("model.ckpt")).unwrap();
    assert_ne!(f.model.clf, f.baseline);
}

#[test]
fn eval_outputs_are_consistent() {
    let lab = trained(&[]);
    lab.ok(&["eval"]);
    let metrics = csv_rows(&lab.read("metrics.csv"));
    assert_eq!(lab.read("metrics.csv").lines().next().unwrap(), "policy,M_test,N,top1,top5,map,cost_macs,clips_used,seed");
    assert_eq!(metrics.len(), 2 * 7);
    for row in &metrics {
        let (policy, mt, clips) = (&row[0], row[1].parse::<usize>().unwrap(), row[7].parse::<usize>().unwrap());
        let expected = match policy.as_str() {
            "dense" | "oracle" => 2 * 3,
            "oracle_fused" => mt * 3,
            _ => mt,
        };
        assert_eq!(clips, expected, "{policy} at {mt}");
        assert_eq!(row[4], "NA", "top-5 needs J >= 10");
        if policy == "oracle" {
            assert_eq!(row[5], "NA");
        }
        assert_eq!(row[8], "11");
    }

    let json: serde_json::Value = serde_json::from_str(&lab.read("metrics.json")).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), metrics.len());
    for (j, c) in rows.iter().zip(&metrics) {
        assert_eq!(j["policy"].as_str().unwrap(), c[0]);
        assert_eq!(j["top1"].as_f64().unwrap(), c[3].parse::<f64>().unwrap());
        assert_eq!(j["cost_macs"].as_u64().unwrap(), c[6].parse::<u64>().unwrap());
    }

    let preds = csv_rows(&lab.read("predictions.csv"));
    assert_eq!(preds.len(), 2 * 7 * 24);
    for (i, row) in metrics.iter().enumerate() {
        let mine: Vec<_> = preds[i * 24..(i + 1) * 24].iter().collect();
        assert!(mine.iter().all(|p| p[0] == row[0] && p[1] == row[1]));
        let correct = mine.iter().filter(|p| p[3] == p[4]).count() as f64 / 24.0;
        assert!((correct - row[3].parse::<f64>().unwrap()).abs() < 1e-9);
    }

    let sel = csv_rows(&lab.read("selections.csv"));
    assert_eq!(sel.len(), 24 * 2 * 3);
    for chunk in sel.chunks(3) {
        let p: f64 = chunk.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-9);
        assert_eq!(chunk.iter().filter(|r| r[4] == "true").count(), 1);
    }
}

#[test]
fn dense_is_independent_of_m_test() {
    let lab = trained(&[]);
    lab.ok(&["eval"]);
    let rows = csv_rows(&lab.read("metrics.csv"));
    let dense: Vec<_> = rows.iter().filter(|r| r[0] == "dense").collect();
    assert_eq!(dense.len(), 2);
    assert_eq!(dense[0][3], dense[1][3]);
    assert_eq!(dense[0][6], dense[1][6]);
}

#[test]
fn sweep_writes_a_file_per_policy() {
    let lab = trained(&[]);
    lab.ok(&["sweep"]);
    let rows = csv_rows(&lab.read("sweep.csv"));
    assert_eq!(rows.len(), 2 * 7);
    for p in ["dsn", "random", "uniform", "max_response", "dense", "oracle", "oracle_fused"] {
        let dat = lab.read(&format!("sweep_{p}.dat"));
        assert_eq!(dat.lines().next().unwrap(), "# M_test top1");
        assert_eq!(dat.lines().count(), 3, "{p}");
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = ["dataset.bin", "model.ckpt", "metrics.csv", "selections.csv", "checkpoints/epoch_0001.ckpt"]
        .iter()
        .map(|n| (n.to_string(), std::fs::read(dir.join(n)).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn pipeline_is_byte_reproducible() {
    let a = trained(&[]);
    let b = trained(&[]);
    a.ok(&["eval"]);
    b.ok(&["eval"]);
    assert_eq!(snapshot(&a.out()), snapshot(&b.out()));
}

#[test]
fn gradcheck_passes_and_catches_corruption() {
    let o = Command::new(env!("CARGO_BIN_EXE_dsnlab")).arg("gradcheck").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    let bad = Command::new(env!("CARGO_BIN_EXE_dsnlab"))
        .args(["gradcheck", "--corrupt-gradient"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn bad_usage_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_dsnlab")).args(["train"]).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_dsnlab")).args(["frobnicate"]).output().unwrap();
    assert_eq!(code(&o), 2);
}
