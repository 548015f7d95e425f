//! On-disk run artifacts: per-frame traces, success curves, summaries and
//! timings. Everything except `timing.json` is a pure function of the run
//! manifest, so repeated runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use ust_core::eval::{AttributeTable, SuccessCurve};
use ust_core::knn::KnnStore;
use ust_core::tracker::Variant;

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";

pub fn trace_file(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

pub fn curve_file(seed: u64) -> String {
    format!("curve_seed{seed}.csv")
}

pub fn seed_summary_file(seed: u64) -> String {
    format!("summary_seed{seed}.json")
}

pub fn store_file(seed: u64) -> String {
    format!("store_seed{seed}.csv")
}

/// One row of the per-frame trace. The box is in corner convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub occluded: bool,
    pub uncertain: usize,
    pub store_size: usize,
    pub oracle_queries_cumulative: u64,
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub threshold: f64,
    pub success_rate: f64,
}

/// Summary of one seed of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub input: String,
    pub variant: Variant,
    pub seed: u64,
    pub tags: Vec<String>,
    pub frames: usize,
    pub auc: f64,
    pub oracle_queries: u64,
    pub final_store_size: usize,
    pub occluded_frames: usize,
    pub skipped_frames: usize,
}

/// Seed-averaged summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input: String,
    pub variant: Variant,
    pub tags: Vec<String>,
    pub seeds: Vec<u64>,
    pub mean_auc: f64,
    /// Population variance of the per-seed AUCs.
    pub auc_variance: f64,
    pub mean_oracle_queries: f64,
    pub mean_final_store_size: f64,
    pub attributes: AttributeTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub input: String,
    pub variant: Variant,
    pub seed: u64,
    /// Frames processed by the step loop (all but the first).
    pub frames: usize,
    /// Wall-clock seconds spent inside the step loop only.
    pub step_seconds: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub runs: Vec<RunTiming>,
    /// Total frames over total step seconds.
    pub mean_fps: f64,
}

impl Timing {
    pub fn new(runs: Vec<RunTiming>) -> Self {
        let frames: usize = runs.iter().map(|r| r.frames).sum();
        let seconds: f64 = runs.iter().map(|r| r.step_seconds).sum();
        let mean_fps = if seconds > 0.0 { frames as f64 / seconds } else { 0.0 };
        Timing { runs, mean_fps }
    }
}

pub fn curve_rows(curve: &SuccessCurve) -> Vec<CurveRow> {
    curve
        .thresholds
        .iter()
        .zip(&curve.success_rate)
        .map(|(&threshold, &success_rate)| CurveRow { threshold, success_rate })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().with_context(|| format!("reading {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes the live exemplars of `store`, oldest first, one feature
/// component per column.
pub fn write_store_snapshot(path: &Path, store: &KnnStore) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let dim = store.exemplars().next().map_or(0, |e| e.feature.dim());
    let mut header: Vec<String> =
        ["seq", "label", "inserted_at", "timer", "flagged", "outlier", "prototype"].map(String::from).to_vec();
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for e in store.exemplars() {
        let mut rec = vec![
            e.seq().to_string(),
            (e.label.sign() as i8).to_string(),
            e.inserted_at.to_string(),
            e.timer.to_string(),
            e.flagged.to_string(),
            e.outlier.to_string(),
            e.prototype.to_string(),
        ];
        rec.extend(e.feature.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
