//! The slow, long-memory classifier that labels the samples the fast
//! classifier is unsure about.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::geometry::{iou_unchecked, TargetState};
use crate::kdtree::{KdTree, Neighbors};
use crate::math::{hash_words, unit_from_hash};
use crate::sample::{Label, LabeledSet};
use crate::{Error, Result};

/// What the oracle is asked about: the candidate's feature, plus its state
/// and frame for oracles that judge geometry.
#[derive(Debug, Clone, Copy)]
pub struct OracleQuery<'a> {
    pub feature: &'a [f64],
    pub state: &'a TargetState,
    pub frame: usize,
}

pub trait Oracle {
    /// Decision value in `[-1, 1]`; its sign is the label. Counts as one
    /// query.
    fn decide(&self, query: &OracleQuery<'_>) -> Result<f64>;

    fn label(&self, query: &OracleQuery<'_>) -> Result<Label> {
        self.decide(query).map(Label::from_score)
    }

    /// Folds a batch of labelled samples into the oracle's memory.
    fn retrain(&mut self, batch: &LabeledSet);

    fn query_count(&self) -> u64;
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn decide(&self, query: &OracleQuery<'_>) -> Result<f64> {
        (**self).decide(query)
    }

    fn retrain(&mut self, batch: &LabeledSet) {
        (**self).retrain(batch)
    }

    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
}

/// Nearest-neighbour vote over every sample ever received. Never forgets;
/// the index is rebuilt on each retrain.
#[derive(Debug)]
pub struct ArchiveNnOracle {
    k: usize,
    dim: Option<usize>,
    coords: Vec<f64>,
    labels: Vec<Label>,
    tree: KdTree,
    queries: Cell<u64>,
}

impl ArchiveNnOracle {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("oracle k must be at least 1"));
        }
        Ok(ArchiveNnOracle {
            k,
            dim: None,
            coords: Vec::new(),
            labels: Vec::new(),
            tree: KdTree::default(),
            queries: Cell::new(0),
        })
    }

    pub fn archive_len(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Oracle for ArchiveNnOracle {
    fn decide(&self, query: &OracleQuery<'_>) -> Result<f64> {
        self.queries.set(self.queries.get() + 1);
        let dim = self.dim.ok_or(Error::Untrained)?;
        if query.feature.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: query.feature.len() });
        }
        let mut nn = Neighbors::new(self.k);
        self.tree.search(query.feature, &|id| Some(id as u64), &mut nn);
        let sum: f64 = nn.iter().map(|(_, id)| self.labels[id as usize].sign()).sum();
        Ok(sum / nn.len() as f64)
    }

    fn retrain(&mut self, batch: &LabeledSet) {
        if batch.is_empty() {
            return;
        }
        for s in batch {
            let dim = *self.dim.get_or_insert(s.feature.dim());
            if s.feature.dim() != dim {
                log::warn!("oracle retrain: dropping sample of dimension {} (expected {dim})", s.feature.dim());
                continue;
            }
            self.coords.extend_from_slice(&s.feature);
            self.labels.push(s.label);
        }
        let dim = self.dim.unwrap_or(0);
        self.tree = KdTree::build(&self.coords, dim, (0..self.labels.len() as u32).collect());
    }

    fn query_count(&self) -> u64 {
        self.queries.get()
    }
}

/// Ground truth of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthFrame {
    pub state: TargetState,
    /// Visible fraction of the target, 1 = unoccluded, 0 = fully hidden.
    pub visibility: f64,
}

pub trait GroundTruth {
    fn truth(&self, frame: usize) -> Option<TruthFrame>;
}

impl<G: GroundTruth + ?Sized> GroundTruth for Arc<G> {
    fn truth(&self, frame: usize) -> Option<TruthFrame> {
        (**self).truth(frame)
    }
}

impl<G: GroundTruth + ?Sized> GroundTruth for &G {
    fn truth(&self, frame: usize) -> Option<TruthFrame> {
        (**self).truth(frame)
    }
}

/// Per-frame boxes with full visibility, e.g. loaded from a ground-truth
/// file.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable(pub Vec<TargetState>);

impl GroundTruth for TruthTable {
    fn truth(&self, frame: usize) -> Option<TruthFrame> {
        self.0.get(frame).map(|&state| TruthFrame { state, visibility: 1.0 })
    }
}

/// Test-double oracle that answers from ground truth: positive when the
/// queried box overlaps the visible target by more than
/// `overlap_threshold`. Answers are flipped with `flip_probability`, using a
/// hash of the query so repeated questions get the same answer.
#[derive(Debug)]
pub struct ScriptedOracle<G> {
    truth: G,
    flip_probability: f64,
    overlap_threshold: f64,
    min_visibility: f64,
    seed: u64,
    queries: Cell<u64>,
}

impl<G: GroundTruth> ScriptedOracle<G> {
    pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.7;

    pub fn new(truth: G, flip_probability: f64, overlap_threshold: f64, seed: u64) -> Self {
        ScriptedOracle {
            truth,
            flip_probability: flip_probability.clamp(0.0, 1.0),
            overlap_threshold: overlap_threshold.clamp(1e-6, 1.0 - 1e-6),
            min_visibility: 0.5,
            seed,
            queries: Cell::new(0),
        }
    }

    pub fn try_new(truth: G, flip_probability: f64, overlap_threshold: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&flip_probability) {
            return Err(Error::invalid("flip probability must be in [0, 1)"));
        }
        if !(overlap_threshold > 0.0 && overlap_threshold < 1.0) {
            return Err(Error::invalid("overlap threshold must be in (0, 1)"));
        }
        Ok(Self::new(truth, flip_probability, overlap_threshold, seed))
    }

    /// Visible fraction below which the target counts as absent.
    pub fn with_min_visibility(mut self, v: f64) -> Self {
        self.min_visibility = v;
        self
    }

    fn flips(&self, q: &OracleQuery<'_>) -> bool {
        if self.flip_probability <= 0.0 {
            return false;
        }
        let s = q.state;
        let h = hash_words(&[self.seed, q.frame as u64, s.cx.to_bits(), s.cy.to_bits(), s.w.to_bits(), s.h.to_bits()]);
        unit_from_hash(h) < self.flip_probability
    }
}

impl<G: GroundTruth> Oracle for ScriptedOracle<G> {
    fn decide(&self, q: &OracleQuery<'_>) -> Result<f64> {
        self.queries.set(self.queries.get() + 1);
        let truth = self.truth.truth(q.frame).ok_or(Error::Untrained)?;
        q.state.validate()?;
        let overlap = iou_unchecked(q.state, &truth.state);
        let thr = self.overlap_threshold;
        let visible = truth.visibility > self.min_visibility;
        let mut d = if visible && overlap > thr {
            (overlap - thr) / (1.0 - thr)
        } else if visible {
            -(1.0 - overlap / thr)
        } else {
            -1.0
        };
        if self.flips(q) {
            d = if d > 0.0 { -d } else { (-d).max(1e-3) };
        }
        Ok(d)
    }

    fn retrain(&mut self, _batch: &LabeledSet) {}

    fn query_count(&self) -> u64 {
        self.queries.get()
    }
}
