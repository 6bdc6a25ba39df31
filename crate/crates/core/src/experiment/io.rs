//! CSV rows written by the runner and read back by `evaluate`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::MatchRecord;

/// One (cell, policy, replication) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    /// Run file relative to the output directory; empty when not written.
    pub file: String,
    pub policy: String,
    pub b: usize,
    pub method: String,
    pub replication: usize,
    pub arrival_seed: u64,
    pub policy_seed: u64,
    pub n_arrivals: usize,
    pub n_matched: usize,
    pub alg_total: f64,
    pub opt_total: f64,
    pub ratio: f64,
    pub replans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub b: usize,
    pub method: String,
    pub n: usize,
    /// Mean of the per-run ratios.
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub se_ratio: f64,
    pub ratio_of_means: f64,
    pub mean_alg: f64,
    pub mean_opt: f64,
    /// `policy@b` the p-value compares against.
    pub baseline: String,
    /// Two-sided Wilcoxon signed-rank p-value of the paired per-run ratios.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub b: usize,
    pub n_clusters: usize,
    pub cluster_seconds: f64,
    pub lp_seconds: f64,
    pub lp_iterations: usize,
    pub lp_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub method: String,
    pub b: usize,
    pub n_clusters: usize,
    pub delta_max: f64,
    pub nmae_mean: f64,
    pub nmae_max: f64,
    pub alpha: f64,
    /// `alpha(b) (1 - 2 delta)`; empty when `delta >= 1`.
    pub clustered_bound: Option<f64>,
    pub heuristic_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub method: String,
    pub b: usize,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub round: u32,
    pub donor_type: usize,
    pub patient: Option<usize>,
    pub weight: f64,
    pub success: bool,
    pub discarded: bool,
    pub resampled: bool,
    pub policy: String,
}

impl RecordRow {
    pub fn new(r: &MatchRecord, policy: &str) -> Self {
        RecordRow {
            round: r.round,
            donor_type: r.donor_type,
            patient: r.patient,
            weight: r.weight,
            success: r.success,
            discarded: r.discarded,
            resampled: r.resampled,
            policy: policy.to_string(),
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}
