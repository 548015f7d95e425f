//! Budgeted k-nearest-neighbour classifier: the fast, short-memory half of
//! the co-tracker.
//!
//! Every stored exemplar carries a countdown timer. The store applies five
//! accounting rules:
//!
//! 1. a new sample whose whole neighbourhood already carries its label is
//!    discarded (absorbed);
//! 2. timers count down once per frame and flag the exemplar at zero;
//! 3. a new sample whose whole neighbourhood carries the opposite label is
//!    stored but marked as an outlier;
//! 4. every actual insertion adds one frame to the timers of the neighbours
//!    that disagree with it;
//! 5. a flagged exemplar is removed if its neighbourhood agrees with it, or
//!    if it is an outlier that still has no agreeing neighbour; otherwise it
//!    becomes a permanent prototype.
//!
//! The neighbourhood used by the rules is the same `k`-neighbourhood that
//! votes in [`KnnStore::score`]. Distance ties go to the older exemplar.

use alloc::vec::Vec;

use crate::kdtree::{KdTree, Neighbors};
use crate::sample::{FeatureVector, Label};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct KnnConfig {
    /// Neighbourhood size for voting and for the budgeting rules.
    pub k: usize,
    /// Frames a new exemplar lives before it is flagged.
    pub initial_timer: u32,
    /// Apply the budgeting rules. When off the store only grows.
    pub budgeting: bool,
    /// Hard cap on the number of exemplars; oldest non-prototypes go first.
    pub budget_cap: Option<usize>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 10, initial_timer: 10, budgeting: true, budget_cap: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub feature: FeatureVector,
    pub label: Label,
    /// Frames left before the exemplar is flagged. Ignored for prototypes.
    pub timer: u32,
    pub flagged: bool,
    pub outlier: bool,
    pub prototype: bool,
    pub inserted_at: usize,
    seq: u64,
}

impl Exemplar {
    /// Insertion sequence number; lower is older.
    pub fn seq(&self) -> u64 {
        self.seq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Absorbed,
    Inserted,
    InsertedAsOutlier,
}

impl InsertOutcome {
    pub fn stored(self) -> bool {
        !matches!(self, InsertOutcome::Absorbed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub absorbed: usize,
    pub outliers_removed: usize,
    pub prototypes_promoted: usize,
    /// Removed by the hard cap.
    pub evicted: usize,
}

/// Cumulative counters over the life of a store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BudgetStats {
    pub insert_attempts: u64,
    pub absorbed_on_insert: u64,
    pub outliers_marked: u64,
    pub pruned_absorbed: u64,
    pub pruned_outliers: u64,
    pub prototypes_promoted: u64,
    pub evicted: u64,
}

#[derive(Debug, Clone)]
pub struct KnnStore {
    cfg: KnnConfig,
    dim: Option<usize>,
    slots: Vec<Option<Exemplar>>,
    coords: Vec<f64>,
    tree: KdTree,
    /// Slots below this index are covered by `tree`; the rest are scanned.
    indexed: usize,
    live: usize,
    churn: usize,
    next_seq: u64,
    stats: BudgetStats,
}

impl KnnStore {
    pub fn new(cfg: KnnConfig) -> Result<Self> {
        if cfg.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if cfg.budget_cap == Some(0) {
            return Err(Error::invalid("budget cap must be at least 1"));
        }
        Ok(KnnStore {
            cfg,
            dim: None,
            slots: Vec::new(),
            coords: Vec::new(),
            tree: KdTree::default(),
            indexed: 0,
            live: 0,
            churn: 0,
            next_seq: 0,
            stats: BudgetStats::default(),
        })
    }

    pub fn config(&self) -> &KnnConfig {
        &self.cfg
    }

    pub fn k(&self) -> usize {
        self.cfg.k
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn stats(&self) -> BudgetStats {
        self.stats
    }

    /// Live exemplars, oldest first.
    pub fn exemplars(&self) -> impl Iterator<Item = &Exemplar> + '_ {
        self.slots.iter().flatten()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => Err(Error::DimensionMismatch { expected: d, found: x.len() }),
            _ => Ok(()),
        }
    }

    fn nearest(&self, x: &[f64], k: usize) -> Neighbors {
        let mut out = Neighbors::new(k);
        let slots = &self.slots;
        let tie = |id: u32| slots[id as usize].as_ref().map(|e| e.seq);
        self.tree.search(x, &tie, &mut out);
        if let Some(dim) = self.dim {
            for id in self.indexed..self.slots.len() {
                if let Some(e) = &self.slots[id] {
                    let p = &self.coords[id * dim..(id + 1) * dim];
                    if let Some(d2) = crate::math::sq_dist_within(x, p, out.worst_d2()) {
                        out.offer(d2, e.seq, id as u32);
                    }
                }
            }
        }
        out
    }

    /// Slot ids of the `k` nearest exemplars, excluding `skip`.
    fn neighborhood(&self, x: &[f64], skip: Option<usize>) -> Vec<usize> {
        let extra = usize::from(skip.is_some());
        self.nearest(x, self.cfg.k + extra)
            .iter()
            .map(|(_, id)| id as usize)
            .filter(|&id| Some(id) != skip)
            .take(self.cfg.k)
            .collect()
    }

    fn label_of(&self, slot: usize) -> Label {
        self.slots[slot].as_ref().map(|e| e.label).unwrap_or(Label::Negative)
    }

    /// The `k` nearest exemplars to `x` as `(squared distance, exemplar)`,
    /// nearest first.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<(f64, &Exemplar)>> {
        self.check_dim(x)?;
        Ok(self
            .nearest(x, self.cfg.k)
            .iter()
            .filter_map(|(d2, id)| self.slots[id as usize].as_ref().map(|e| (d2, e)))
            .collect())
    }

    /// Mean label of the `k` nearest exemplars (all of them when fewer than
    /// `k` are stored), in `[-1, 1]`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if self.live == 0 {
            return Err(Error::EmptyStore);
        }
        self.check_dim(x)?;
        let nn = self.nearest(x, self.cfg.k);
        let sum: f64 = nn.iter().map(|(_, id)| self.label_of(id as usize).sign()).sum();
        Ok(sum / nn.len() as f64)
    }

    /// Adds a labelled sample, applying rules 1, 3 and 4.
    pub fn insert(&mut self, x: &FeatureVector, label: Label, frame: usize) -> Result<InsertOutcome> {
        self.check_dim(x)?;
        self.stats.insert_attempts += 1;
        if !self.cfg.budgeting || self.live == 0 {
            self.store(x, label, frame, false);
            return Ok(InsertOutcome::Inserted);
        }

        let hood = self.neighborhood(x, None);
        let same = hood.iter().filter(|&&id| self.label_of(id) == label).count();
        if same == hood.len() {
            self.stats.absorbed_on_insert += 1;
            return Ok(InsertOutcome::Absorbed);
        }
        let outlier = same == 0;
        for &id in &hood {
            if let Some(e) = self.slots[id].as_mut() {
                if e.label != label && !e.prototype {
                    e.timer = e.timer.saturating_add(1);
                }
            }
        }
        self.store(x, label, frame, outlier);
        if outlier {
            self.stats.outliers_marked += 1;
            Ok(InsertOutcome::InsertedAsOutlier)
        } else {
            Ok(InsertOutcome::Inserted)
        }
    }

    /// Stores a sample unconditionally (initial seeding). The exemplar still
    /// gets a timer and is subject to later pruning.
    pub fn seed(&mut self, x: &FeatureVector, label: Label, frame: usize) -> Result<()> {
        self.check_dim(x)?;
        self.store(x, label, frame, false);
        Ok(())
    }

    fn store(&mut self, x: &FeatureVector, label: Label, frame: usize, outlier: bool) {
        if let Some(cap) = self.cfg.budget_cap {
            while self.live >= cap {
                self.evict_oldest();
            }
        }
        let dim = *self.dim.get_or_insert(x.dim());
        debug_assert_eq!(dim, x.dim());
        self.coords.extend_from_slice(x);
        self.slots.push(Some(Exemplar {
            feature: x.clone(),
            label,
            timer: self.cfg.initial_timer,
            flagged: false,
            outlier,
            prototype: false,
            inserted_at: frame,
            seq: self.next_seq,
        }));
        self.next_seq += 1;
        self.live += 1;
        self.churn += 1;
        self.maybe_rebuild();
    }

    fn remove(&mut self, slot: usize) {
        if self.slots[slot].take().is_some() {
            self.live -= 1;
            self.churn += 1;
        }
    }

    /// Evicts the oldest non-prototype, or the oldest prototype when only
    /// prototypes remain.
    fn evict_oldest(&mut self) {
        let victim = self
            .slots
            .iter()
            .position(|e| e.as_ref().is_some_and(|e| !e.prototype))
            .or_else(|| self.slots.iter().position(Option::is_some));
        if let Some(slot) = victim {
            self.remove(slot);
            self.stats.evicted += 1;
        }
    }

    /// Advances every timer by one frame. Returns how many exemplars were
    /// newly flagged.
    pub fn tick(&mut self) -> usize {
        if !self.cfg.budgeting {
            return 0;
        }
        let mut flagged = 0;
        for e in self.slots.iter_mut().flatten() {
            if e.prototype || e.flagged {
                continue;
            }
            e.timer = e.timer.saturating_sub(1);
            if e.timer == 0 {
                e.flagged = true;
                flagged += 1;
            }
        }
        flagged
    }

    /// Resolves flagged exemplars (rule 5), oldest first, against the store
    /// as it shrinks, then enforces the hard cap.
    pub fn prune(&mut self) -> PruneReport {
        let mut report = PruneReport::default();
        if self.cfg.budgeting {
            let flagged: Vec<usize> = self
                .slots
                .iter()
                .enumerate()
                .filter_map(|(i, e)| e.as_ref().is_some_and(|e| e.flagged).then_some(i))
                .collect();
            for slot in flagged {
                let Some(e) = self.slots[slot].as_ref() else { continue };
                let (label, outlier) = (e.label, e.outlier);
                let x = e.feature.clone();
                let hood = self.neighborhood(&x, Some(slot));
                let same = hood.iter().filter(|&&id| self.label_of(id) == label).count();
                if !hood.is_empty() && same == hood.len() {
                    self.remove(slot);
                    report.absorbed += 1;
                } else if outlier && same == 0 && !hood.is_empty() {
                    self.remove(slot);
                    report.outliers_removed += 1;
                } else if let Some(e) = self.slots[slot].as_mut() {
                    e.flagged = false;
                    e.prototype = true;
                    report.prototypes_promoted += 1;
                }
            }
        }
        if let Some(cap) = self.cfg.budget_cap {
            while self.live > cap {
                self.evict_oldest();
                report.evicted += 1;
            }
        }
        self.stats.pruned_absorbed += report.absorbed as u64;
        self.stats.pruned_outliers += report.outliers_removed as u64;
        self.stats.prototypes_promoted += report.prototypes_promoted as u64;
        self.maybe_rebuild();
        report
    }

    fn maybe_rebuild(&mut self) {
        if self.churn * 4 > self.live {
            self.rebuild();
        }
    }

    fn rebuild(&mut self) {
        let dim = self.dim.unwrap_or(0);
        let old = core::mem::take(&mut self.slots);
        self.coords.clear();
        for e in old.into_iter().flatten() {
            self.coords.extend_from_slice(&e.feature);
            self.slots.push(Some(e));
        }
        debug_assert_eq!(self.coords.len(), self.slots.len() * dim);
        self.tree = KdTree::build(&self.coords, dim, (0..self.slots.len() as u32).collect());
        self.indexed = self.slots.len();
        self.churn = 0;
    }

    /// Checks that the spatial index and the exemplar collection hold the
    /// same members.
    pub fn validate_index(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(alloc::format!("index out of sync: {msg}")));
        if self.slots.iter().flatten().count() != self.live {
            return bad("live count");
        }
        if self.tree.len() != self.indexed {
            return bad("tree size");
        }
        let mut seen = alloc::vec![false; self.indexed];
        for &id in self.tree.ids() {
            let id = id as usize;
            if id >= self.indexed || seen[id] {
                return bad("tree id");
            }
            seen[id] = true;
        }
        if let Some(dim) = self.dim {
            for (i, e) in self.slots.iter().enumerate() {
                if let Some(e) = e {
                    if self.coords[i * dim..(i + 1) * dim] != e.feature[..] {
                        return bad("coordinates");
                    }
                }
            }
        }
        Ok(())
    }
}
