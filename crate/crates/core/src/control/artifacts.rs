//! Run directories: every export of a run plus a manifest listing them.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{write_events_jsonl, Comparison, ControlError, RunRecord};
use crate::shield::write_block_events_csv;
use crate::simnet::write_trajectory_csv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub seed: u64,
    pub shield: bool,
    pub intent: String,
    pub created_unix: u64,
    pub files: Vec<ManifestEntry>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn put(&mut self, file: &str, kind: &str, bytes: impl AsRef<[u8]>) -> Result<(), ControlError> {
        let path = self.dir.join(file);
        fs::write(&path, bytes).map_err(|e| ControlError::io(&path, e))?;
        self.files.push(ManifestEntry { file: file.to_string(), kind: kind.to_string() });
        Ok(())
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes every artifact of `record` into `dir` (created if missing) and
/// returns the manifest, also stored as `manifest.json`.
pub fn write_run_dir(record: &RunRecord, dir: &Path) -> Result<Manifest, ControlError> {
    fs::create_dir_all(dir).map_err(|e| ControlError::io(dir, e))?;
    let mut w = Writer { dir, files: Vec::new() };
    w.put("intent.intent", "intent", record.intent.to_file_text())?;
    w.put("config.json", "config", json(&record.config))?;
    w.put("metrics.json", "metrics", json(&record.metrics))?;
    let mut metrics_csv = csv::Writer::from_writer(Vec::new());
    metrics_csv.write_record(["episode", "reward"])?;
    for (i, r) in record.metrics.episode_rewards.iter().enumerate() {
        metrics_csv.write_record([i.to_string(), r.to_string()])?;
    }
    w.put("metrics.csv", "csv", metrics_csv.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)?;
    let mut events = Vec::new();
    write_events_jsonl(&record.events, &mut events).map_err(|e| ControlError::io(&dir.join("events.jsonl"), e))?;
    w.put("events.jsonl", "events", events)?;
    let mut blocks = Vec::new();
    write_block_events_csv(&record.block_events, &mut blocks)?;
    w.put("block_events.csv", "csv", blocks)?;
    let mut traj = Vec::new();
    write_trajectory_csv(&record.trajectory, &mut traj)?;
    w.put("trajectory.csv", "csv", traj)?;
    w.put("experience.csv", "csv", &record.experience_csv)?;
    w.put("qtable.csv", "csv", &record.qtable_csv)?;
    w.put("ba.dot", "dot", &record.artifacts.ba_dot)?;
    w.put("ba_neg.dot", "dot", &record.artifacts.ba_neg_dot)?;
    w.put("cmdp.dot", "dot", &record.artifacts.cmdp_dot)?;
    w.put("cmdp.json", "json", &record.artifacts.cmdp_json)?;
    w.put("product.dot", "dot", &record.artifacts.product_dot)?;
    w.put("witnesses.json", "json", &record.artifacts.witnesses_json)?;
    w.put("realizability.json", "json", json(&record.realizability))?;
    let manifest = Manifest {
        run_id: record.run_id.clone(),
        seed: record.seed,
        shield: record.config.shield,
        intent: record.intent.name.clone().unwrap_or_else(|| record.intent.text.clone()),
        created_unix: now(),
        files: w.files,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, json(&manifest)).map_err(|e| ControlError::io(&path, e))?;
    Ok(manifest)
}

/// `comparison.csv`, `episode_rewards.csv`, `summary.json`, and one run
/// directory per record.
pub fn write_comparison_dir(c: &Comparison, dir: &Path) -> Result<(), ControlError> {
    fs::create_dir_all(dir).map_err(|e| ControlError::io(dir, e))?;
    let mut table = csv::Writer::from_path(dir.join("comparison.csv"))?;
    for r in &c.rows {
        table.serialize(r)?;
    }
    table.flush().map_err(|e| ControlError::io(&dir.join("comparison.csv"), e))?;
    let mut series = csv::Writer::from_path(dir.join("episode_rewards.csv"))?;
    series.write_record(["seed", "shield", "episode", "reward"])?;
    for r in &c.records {
        for (i, v) in r.metrics.episode_rewards.iter().enumerate() {
            series.write_record([r.seed.to_string(), r.config.shield.to_string(), i.to_string(), v.to_string()])?;
        }
    }
    series.flush().map_err(|e| ControlError::io(&dir.join("episode_rewards.csv"), e))?;
    let summary = serde_json::json!({
        "with_shield": c.with_shield,
        "without_shield": c.without_shield,
        "median_delta": c.delta,
    });
    let path = dir.join("summary.json");
    fs::write(&path, json(&summary)).map_err(|e| ControlError::io(&path, e))?;
    for r in &c.records {
        write_run_dir(r, &dir.join(&r.run_id))?;
    }
    Ok(())
}
