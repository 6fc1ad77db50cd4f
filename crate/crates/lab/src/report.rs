//! CSV, JSON and plot-data emission. Every file is written whole through a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use dsn_core::eval::{MetricsReport, Policy, SelectionRow};
use dsn_core::trainer::EpochLog;
use serde_json::{json, Value};

use crate::error::{LabError, Result};

pub const METRICS_HEADER: &str = "policy,M_test,N,top1,top5,map,cost_macs,clips_used,seed";
pub const TRAIN_LOG_HEADER: &str = "epoch,classifier_loss,mean_advantage,hit_rate,wall_ms";
pub const SELECTIONS_HEADER: &str = "video_id,section,clip,prob,chosen,planted";
pub const PREDICTIONS_HEADER: &str = "policy,M_test,video_id,label,predicted";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LabError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| LabError::io(path, e.error))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn metrics_csv(rows: &[MetricsReport], seed: u64) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.m_test,
            r.n,
            r.top1,
            opt(r.top5),
            opt(r.map),
            r.cost_macs,
            r.clips_used,
            seed
        )
        .unwrap();
    }
    out
}

pub fn metrics_json(rows: &[MetricsReport], seed: u64) -> Value {
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "policy": r.policy.name(),
                "M_test": r.m_test,
                "N": r.n,
                "top1": r.top1,
                "top5": r.top5,
                "map": r.map,
                "map_excluded_classes": r.map_excluded,
                "cost_macs": r.cost_macs,
                "clips_used": r.clips_used,
                "seed": seed,
            })
        })
        .collect();
    json!({ "seed": seed, "rows": rows })
}

pub fn predictions_csv(rows: &[MetricsReport]) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for r in rows {
        for v in &r.videos {
            writeln!(out, "{},{},{},{},{}", r.policy, r.m_test, v.video_id, v.label, v.predicted).unwrap();
        }
    }
    out
}

pub fn selections_csv(rows: &[SelectionRow]) -> String {
    let mut out = String::from(SELECTIONS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.video_id, r.section, r.clip, r.prob, r.chosen, r.planted).unwrap();
    }
    out
}

/// One training-log line; `wall_ms` is elapsed time since training began.
pub fn train_log_line(log: &EpochLog, wall_ms: u128) -> String {
    format!(
        "{},{},{},{},{}\n",
        log.epoch,
        opt(log.classifier_loss),
        log.mean_advantage,
        log.hit_rate,
        wall_ms
    )
}

/// Whitespace-delimited `M_test top1` pairs for one policy.
pub fn sweep_dat(rows: &[MetricsReport], policy: Policy) -> String {
    let mut out = String::from("# M_test top1\n");
    for r in rows.iter().filter(|r| r.policy == policy) {
        writeln!(out, "{} {}", r.m_test, r.top1).unwrap();
    }
    out
}
