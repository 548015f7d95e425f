//! Success plots, AUC and attribute tables.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{iou, TargetState};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID: usize = 101;
pub const ALL_ROW: &str = "ALL";

/// Fraction of frames whose overlap strictly exceeds each threshold. A
/// perfect overlap counts as a success at every threshold, including 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SuccessCurve {
    /// Uniform over `[0, 1]`, ascending.
    pub thresholds: Vec<f64>,
    /// Non-increasing.
    pub success_rate: Vec<f64>,
    /// Mean of `success_rate`.
    pub auc: f64,
}

impl SuccessCurve {
    /// Curve from per-frame overlaps.
    pub fn from_overlaps(overlaps: &[f64], grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::invalid("grid size must be at least 2"));
        }
        if overlaps.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, found: 0 });
        }
        let mut sorted = overlaps.to_vec();
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let step = (grid_size - 1) as f64;
        let thresholds: Vec<f64> = (0..grid_size).map(|i| i as f64 / step).collect();
        let success_rate: Vec<f64> = thresholds
            .iter()
            .map(|&tau| {
                let failed = sorted.partition_point(|&o| o <= tau && o < 1.0);
                (sorted.len() - failed) as f64 / n
            })
            .collect();
        let auc = success_rate.iter().sum::<f64>() / grid_size as f64;
        Ok(SuccessCurve { thresholds, success_rate, auc })
    }
}

/// Per-frame IoU of estimates against truth.
pub fn overlaps(estimates: &[TargetState], truth: &[TargetState]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: estimates.len() });
    }
    estimates.iter().zip(truth).map(|(e, g)| iou(e, g)).collect()
}

pub fn success_curve(estimates: &[TargetState], truth: &[TargetState], grid_size: usize) -> Result<SuccessCurve> {
    SuccessCurve::from_overlaps(&overlaps(estimates, truth)?, grid_size)
}

/// One evaluated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub tags: Vec<String>,
    pub auc: f64,
}

impl RunRecord {
    pub fn new(scenario: impl Into<String>, tags: &[&str], curve: &SuccessCurve) -> Self {
        RunRecord { scenario: scenario.into(), tags: tags.iter().map(|&t| t.into()).collect(), auc: curve.auc }
    }
}

/// Seed statistics of one scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioSummary {
    pub scenario: String,
    pub tags: Vec<String>,
    pub runs: usize,
    pub mean_auc: f64,
    /// Population variance over seeds.
    pub auc_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AttributeRow {
    pub attribute: String,
    /// Mean over the scenarios carrying the attribute of their seed-mean AUC.
    pub mean_auc: f64,
    pub scenarios: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AttributeTable {
    /// Sorted by name, with the `ALL` row last.
    pub rows: Vec<AttributeRow>,
    pub scenarios: Vec<ScenarioSummary>,
}

impl AttributeTable {
    pub fn row(&self, attribute: &str) -> Option<&AttributeRow> {
        self.rows.iter().find(|r| r.attribute == attribute)
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioSummary> {
        self.scenarios.iter().find(|s| s.scenario == name)
    }
}

/// Averages repeated seeds per scenario, then scenarios per attribute tag.
pub fn aggregate(runs: &[RunRecord]) -> Result<AttributeTable> {
    if runs.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, found: 0 });
    }
    let mut by_scenario: BTreeMap<&str, (Vec<String>, Vec<f64>)> = BTreeMap::new();
    for r in runs {
        let entry = by_scenario.entry(&r.scenario).or_insert_with(|| (Vec::new(), Vec::new()));
        for t in &r.tags {
            if !entry.0.contains(t) {
                entry.0.push(t.clone());
            }
        }
        entry.1.push(r.auc);
    }

    let scenarios: Vec<ScenarioSummary> = by_scenario
        .into_iter()
        .map(|(name, (tags, aucs))| {
            let n = aucs.len() as f64;
            let mean = aucs.iter().sum::<f64>() / n;
            let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
            ScenarioSummary { scenario: name.into(), tags, runs: aucs.len(), mean_auc: mean, auc_variance: var }
        })
        .collect();

    let mut by_tag: BTreeMap<&str, Vec<&ScenarioSummary>> = BTreeMap::new();
    for s in &scenarios {
        for t in &s.tags {
            by_tag.entry(t.as_str()).or_default().push(s);
        }
    }
    let row = |attribute: &str, members: &[&ScenarioSummary]| AttributeRow {
        attribute: attribute.into(),
        mean_auc: members.iter().map(|s| s.mean_auc).sum::<f64>() / members.len() as f64,
        scenarios: members.len(),
        runs: members.iter().map(|s| s.runs).sum(),
    };
    let mut rows: Vec<AttributeRow> = by_tag.iter().filter(|(t, _)| **t != ALL_ROW).map(|(t, m)| row(t, m)).collect();
    let all: Vec<&ScenarioSummary> = scenarios.iter().collect();
    rows.push(row(ALL_ROW, &all));
    Ok(AttributeTable { rows, scenarios })
}
