//! Candidates, labels and labelled sample sets.

use alloc::vec::Vec;
use core::ops::Deref;

use crate::geometry::TargetState;
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A finite feature vector. Its length is fixed per run by the projector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(FeatureVector(values))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector(alloc::vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Binary class label: target (+1) or background (-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// Sign of a score. Zero maps to `Negative`.
    pub fn from_score(s: f64) -> Self {
        if s > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn opposite(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

/// Which component assigned a candidate's label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum LabelSource {
    /// The fast nearest-neighbour classifier.
    Fast,
    Oracle,
    /// Out-of-ROI local background or a global background sample.
    ForcedBackground,
}

/// A sampled state together with everything the frame loop learns about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub state: TargetState,
    pub feature: FeatureVector,
    pub score: Option<f64>,
    pub label: Option<Label>,
    pub weight: Option<f64>,
    pub labeled_by: Option<LabelSource>,
    pub in_roi: bool,
    /// Drawn uniformly from distant frame locations rather than around the
    /// previous state.
    pub global: bool,
}

impl Candidate {
    pub fn new(state: TargetState, feature: FeatureVector) -> Self {
        Candidate {
            state,
            feature,
            score: None,
            label: None,
            weight: None,
            labeled_by: None,
            in_roi: false,
            global: false,
        }
    }

    pub(crate) fn force_background(&mut self) {
        self.label = Some(Label::Negative);
        self.labeled_by = Some(LabelSource::ForcedBackground);
        self.weight = Some(0.0);
    }

    /// Importance weight: the score of a positive candidate, zero otherwise.
    /// Scores below zero contribute no weight.
    pub fn importance_weight(score: f64, label: Label) -> f64 {
        if label.is_positive() {
            score.max(0.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub feature: FeatureVector,
    pub label: Label,
    pub frame: usize,
}

/// Ordered collection of labelled features, each tagged with the frame it
/// was collected at.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    items: Vec<LabeledSample>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, feature: FeatureVector, label: Label, frame: usize) {
        self.items.push(LabeledSample { feature, label, frame });
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, LabeledSample> {
        self.items.iter()
    }

    pub fn items(&self) -> &[LabeledSample] {
        &self.items
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn extend_from(&mut self, other: &LabeledSet) {
        self.items.extend_from_slice(&other.items);
    }

    pub(crate) fn take(&mut self) -> LabeledSet {
        core::mem::take(self)
    }
}

impl<'a> IntoIterator for &'a LabeledSet {
    type Item = &'a LabeledSample;
    type IntoIter = core::slice::Iter<'a, LabeledSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
