//! The co-tracking frame loop.
//!
//! Each frame: draw candidates around the previous estimate, score the ones
//! inside the region of interest with the fast classifier, send the least
//! certain ones to the oracle, localize by a score-weighted mean of the
//! positives (or declare the target occluded), then update both
//! classifiers. The fast classifier only ever learns from oracle labels; the
//! oracle is retrained every `delta` frames with everything sampled since
//! its last retrain.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::features::{pca_fit, FeatureProjector};
use crate::geometry::{Rect, TargetState};
use crate::knn::{KnnConfig, KnnStore, PruneReport};
use crate::math::abs;
use crate::oracle::{Oracle, OracleQuery};
use crate::sample::{Candidate, FeatureVector, Label, LabelSource, LabeledSet};
use crate::sampler::{make_roi, Sampler, SamplerConfig};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A frame the tracker can query for patch features.
pub trait FrameSource {
    fn index(&self) -> usize;

    fn bounds(&self) -> Rect;

    /// Raw (pre-projection) feature of the patch under `state`.
    fn raw_feature(&self, state: &TargetState) -> Result<Vec<f64>>;

    /// Regions that moved since the previous frame, if known.
    fn motion_hint(&self) -> Option<Vec<Rect>> {
        None
    }
}

impl<F: FrameSource + ?Sized> FrameSource for &F {
    fn index(&self) -> usize {
        (**self).index()
    }

    fn bounds(&self) -> Rect {
        (**self).bounds()
    }

    fn raw_feature(&self, state: &TargetState) -> Result<Vec<f64>> {
        (**self).raw_feature(state)
    }

    fn motion_hint(&self) -> Option<Vec<Rect>> {
        (**self).motion_hint()
    }
}

/// Tracker arms: the full co-tracker and the single-classifier baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Variant {
    Ust,
    /// Fast classifier alone, labelling its own updates, no budgeting.
    KnnOnly,
    /// Fast classifier alone with budgeting.
    KnnBudgetedOnly,
    /// Oracle labels every candidate.
    OracleOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ust, Variant::KnnOnly, Variant::KnnBudgetedOnly, Variant::OracleOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ust => "ust",
            Variant::KnnOnly => "knn-only",
            Variant::KnnBudgetedOnly => "knn-budgeted-only",
            Variant::OracleOnly => "oracle-only",
        }
    }

    pub fn uses_oracle(self) -> bool {
        matches!(self, Variant::Ust | Variant::OracleOnly)
    }

    pub fn uses_fast_classifier(self) -> bool {
        !matches!(self, Variant::OracleOnly)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown variant '{s}'")))
    }
}

/// How the classifiers are seeded from the first frame.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct InitConfig {
    /// Jittered copies of the initial box used as positives.
    pub positives: usize,
    /// Maximum jitter as a fraction of the box extent.
    pub jitter: f64,
    /// Ring radii, in box extents, at which background boxes are placed.
    pub ring_radii: Vec<f64>,
    pub ring_angles: usize,
    /// When false the fast classifier starts empty and the first frame is
    /// labelled entirely by the oracle.
    pub seed_fast_classifier: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            positives: 20,
            jitter: 0.05,
            ring_radii: alloc::vec![0.5, 1.0, 1.5],
            ring_angles: 8,
            seed_fast_classifier: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct TrackerConfig {
    /// Neighbourhood size of the fast classifier.
    pub k: usize,
    /// Number of closest-to-zero scores always sent to the oracle.
    pub m: usize,
    /// Scores strictly inside `(tau_l, tau_u)` are all sent to the oracle.
    pub tau_l: f64,
    pub tau_u: f64,
    /// The positive count must exceed this for a valid localization.
    pub tau_p: usize,
    /// The summed positive weight must exceed this for a valid localization.
    pub tau_a: f64,
    /// Oracle retrain period in frames.
    pub delta: usize,
    /// Lifetime in frames of a new exemplar before it is reviewed.
    pub alpha0: u32,
    pub budget_cap: Option<usize>,
    /// Dimension after PCA.
    pub feature_dim: usize,
    pub sampler: SamplerConfig,
    pub init: InitConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            k: 10,
            m: 5,
            tau_l: -0.4,
            tau_u: 0.4,
            tau_p: 3,
            tau_a: 1.0,
            delta: 10,
            alpha0: 10,
            budget_cap: None,
            feature_dim: 20,
            sampler: SamplerConfig::default(),
            init: InitConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.tau_l < self.tau_u) {
            return Err(Error::invalid("tau_l must be below tau_u"));
        }
        if self.m > self.sampler.n {
            return Err(Error::invalid("m must not exceed n"));
        }
        if self.delta == 0 {
            return Err(Error::invalid("delta must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if self.budget_cap == Some(0) {
            return Err(Error::invalid("budget cap must be at least 1"));
        }
        Ok(())
    }

    pub fn knn_config(&self, variant: Variant) -> KnnConfig {
        KnnConfig {
            k: self.k,
            initial_timer: self.alpha0,
            budgeting: variant != Variant::KnnOnly,
            budget_cap: self.budget_cap,
        }
    }
}

/// Indices of uncertain scores: every score strictly inside
/// `(tau_l, tau_u)` plus the `m` scores closest to zero (ties by index).
/// Returned in ascending order.
pub fn select_uncertain(scores: &[f64], tau_l: f64, tau_u: f64, m: usize) -> Vec<usize> {
    let mut chosen = alloc::vec![false; scores.len()];
    for (i, &s) in scores.iter().enumerate() {
        if tau_l < s && s < tau_u {
            chosen[i] = true;
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| abs(scores[a]).total_cmp(&abs(scores[b])).then(a.cmp(&b)));
    for &i in order.iter().take(m) {
        chosen[i] = true;
    }
    chosen.iter().enumerate().filter_map(|(i, &c)| c.then_some(i)).collect()
}

/// Labels every candidate and returns the uncertain set (indices into
/// `cands`).
///
/// Candidates outside the ROI and global samples are forced to background.
/// For [`Variant::Ust`] the uncertain candidates are labelled by the oracle
/// and the rest by the sign of the fast score; when the fast classifier is
/// still empty every in-ROI candidate goes to the oracle.
pub fn label_candidates<O: Oracle + ?Sized>(
    cands: &mut [Candidate],
    knn: &KnnStore,
    oracle: &O,
    cfg: &TrackerConfig,
    variant: Variant,
    frame: usize,
) -> Result<Vec<usize>> {
    let mut local = Vec::with_capacity(cands.len());
    for (i, c) in cands.iter_mut().enumerate() {
        if c.in_roi && !c.global {
            local.push(i);
        } else {
            c.force_background();
        }
    }

    let ask = |c: &mut Candidate| -> Result<()> {
        let d = oracle.decide(&OracleQuery { feature: &c.feature, state: &c.state, frame })?;
        let label = Label::from_score(d);
        if c.score.is_none() {
            c.score = Some(d);
        }
        c.label = Some(label);
        c.labeled_by = Some(LabelSource::Oracle);
        Ok(())
    };

    let cold = knn.is_empty() && variant.uses_fast_classifier();
    let uncertain: Vec<usize> = if variant == Variant::OracleOnly || (cold && variant == Variant::Ust) {
        for &i in &local {
            ask(&mut cands[i])?;
        }
        local.clone()
    } else if cold {
        // A baseline without exemplars cannot score anything.
        for &i in &local {
            let c = &mut cands[i];
            c.label = Some(Label::Negative);
            c.labeled_by = Some(LabelSource::Fast);
        }
        Vec::new()
    } else {
        let mut scores = Vec::with_capacity(local.len());
        for &i in &local {
            let s = knn.score(&cands[i].feature)?;
            let c = &mut cands[i];
            c.score = Some(s);
            c.label = Some(Label::from_score(s));
            c.labeled_by = Some(LabelSource::Fast);
            scores.push(s);
        }
        let u: Vec<usize> =
            select_uncertain(&scores, cfg.tau_l, cfg.tau_u, cfg.m).into_iter().map(|j| local[j]).collect();
        if variant == Variant::Ust {
            for &i in &u {
                ask(&mut cands[i])?;
            }
        }
        u
    };

    for &i in &local {
        let c = &mut cands[i];
        let label = c.label.unwrap_or(Label::Negative);
        c.weight = Some(Candidate::importance_weight(c.score.unwrap_or(0.0), label));
    }
    Ok(uncertain)
}

/// Score-weighted mean of the positive candidates over `(cx, cy, w, h)`.
/// Falls back to `prev` with `occluded = true` unless the positive count
/// exceeds `tau_p` and the summed weight exceeds `tau_a`.
pub fn localize(cands: &[Candidate], tau_p: usize, tau_a: f64, prev: &TargetState) -> (TargetState, bool) {
    let mut count = 0usize;
    let mut total = 0.0;
    let mut acc = [0.0; 4];
    for c in cands.iter().filter(|c| !c.global && c.label == Some(Label::Positive)) {
        count += 1;
        let w = c.weight.unwrap_or(0.0);
        total += w;
        for (a, v) in acc.iter_mut().zip(c.state.as_array()) {
            *a += w * v;
        }
    }
    if count > tau_p && total > tau_a {
        let est = TargetState::from_array(acc.map(|a| a / total));
        if est.validate().is_ok() {
            return (est, false);
        }
    }
    (*prev, true)
}

/// Everything the tracker did on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: usize,
    pub estimate: TargetState,
    pub occluded: bool,
    /// Local candidates followed by global background samples.
    pub candidates: Vec<Candidate>,
    /// Indices into `candidates` of the uncertain set.
    pub uncertain: Vec<usize>,
    pub uncertain_count: usize,
    pub oracle_queries_this_frame: u64,
    pub oracle_queries_total: u64,
    /// Indices into `candidates` offered to the fast classifier.
    pub fast_update: Vec<usize>,
    pub knn_store_size: usize,
    pub retrained_oracle: bool,
    pub prune: PruneReport,
    /// Feature extraction failed and the frame was skipped.
    pub skipped: bool,
}

#[derive(Debug)]
pub struct Tracker<O> {
    cfg: TrackerConfig,
    variant: Variant,
    knn: KnnStore,
    oracle: O,
    projector: FeatureProjector,
    sampler: Sampler,
    prev: TargetState,
    staging: LabeledSet,
}

struct InitPool {
    states: Vec<TargetState>,
    labels: Vec<Label>,
}

fn init_pool(cfg: &TrackerConfig, truth: &TargetState, bounds: &Rect, sampler: &mut Sampler) -> InitPool {
    let mut states = alloc::vec![*truth];
    let mut labels = alloc::vec![Label::Positive];
    let j = cfg.init.jitter;
    for _ in 0..cfg.init.positives {
        let rng = sampler.rng();
        let dx = rng.random_range(-j..=j) * truth.w;
        let dy = rng.random_range(-j..=j) * truth.h;
        let sw = 1.0 + rng.random_range(-j..=j);
        let sh = 1.0 + rng.random_range(-j..=j);
        states.push(TargetState { cx: truth.cx + dx, cy: truth.cy + dy, w: truth.w * sw, h: truth.h * sh });
        labels.push(Label::Positive);
    }
    let angles = cfg.init.ring_angles.max(1);
    for &r in &cfg.init.ring_radii {
        for a in 0..angles {
            let theta = core::f64::consts::TAU * a as f64 / angles as f64;
            let dx = r * truth.w * libm::cos(theta);
            let dy = r * truth.h * libm::sin(theta);
            states.push(truth.translated(dx, dy).clamped_center(bounds));
            labels.push(Label::Negative);
        }
    }
    for f in [0.5, 2.0] {
        states.push(TargetState { w: truth.w * f, h: truth.h * f, ..*truth });
        labels.push(Label::Negative);
    }
    for s in sampler.draw_global_background(truth, bounds) {
        states.push(s);
        labels.push(Label::Negative);
    }
    InitPool { states, labels }
}

impl<O: Oracle> Tracker<O> {
    /// Seeds both classifiers from the first frame and the known target box,
    /// and fits the feature projection on the seeding pool.
    pub fn init<F: FrameSource + ?Sized>(
        first_frame: &F,
        truth: TargetState,
        cfg: TrackerConfig,
        variant: Variant,
        mut oracle: O,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        truth.validate()?;
        let bounds = first_frame.bounds();
        if !bounds.contains(truth.cx, truth.cy) {
            return Err(Error::invalid("initial box center lies outside the frame"));
        }
        let mut sampler = Sampler::new(cfg.sampler.clone(), seed)?;
        let pool = init_pool(&cfg, &truth, &bounds, &mut sampler);
        let raw: Vec<Vec<f64>> = pool.states.iter().map(|s| first_frame.raw_feature(s)).collect::<Result<_>>()?;
        let projector = pca_fit(&raw, cfg.feature_dim)?;

        let mut knn = KnnStore::new(cfg.knn_config(variant))?;
        let mut batch = LabeledSet::new();
        let frame = first_frame.index();
        for (x, &label) in raw.iter().zip(&pool.labels) {
            let f = projector.project(x)?;
            if variant.uses_fast_classifier() && cfg.init.seed_fast_classifier {
                knn.seed(&f, label, frame)?;
            }
            batch.push(f, label, frame);
        }
        if variant.uses_oracle() {
            oracle.retrain(&batch);
        }
        Ok(Tracker { cfg, variant, knn, oracle, projector, sampler, prev: truth, staging: LabeledSet::new() })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn knn(&self) -> &KnnStore {
        &self.knn
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }

    pub fn projector(&self) -> &FeatureProjector {
        &self.projector
    }

    /// Latest estimate (the initial box before the first step).
    pub fn estimate(&self) -> TargetState {
        self.prev
    }

    /// Projected feature of a box in `frame`.
    pub fn feature<F: FrameSource + ?Sized>(&self, frame: &F, state: &TargetState) -> Result<FeatureVector> {
        self.projector.project(&frame.raw_feature(state)?)
    }

    fn extract<F: FrameSource + ?Sized>(
        &self,
        frame: &F,
        states: &[(TargetState, bool, bool)],
    ) -> Result<Vec<Candidate>> {
        states
            .iter()
            .map(|&(state, in_roi, global)| {
                let raw = frame.raw_feature(&state).map_err(|e| Error::Feature(alloc::format!("{e}")))?;
                let mut c = Candidate::new(state, self.projector.project(&raw)?);
                c.in_roi = in_roi;
                c.global = global;
                Ok(c)
            })
            .collect()
    }

    /// Processes one frame.
    pub fn step<F: FrameSource + ?Sized>(&mut self, frame: &F) -> Result<FrameResult> {
        let t = frame.index();
        let bounds = frame.bounds();
        let hint = frame.motion_hint();
        let roi = make_roi(&self.prev, hint.as_deref(), &bounds);
        let local = self.sampler.draw_candidates(&self.prev, &roi);
        let global = self.sampler.draw_global_background(&self.prev, &bounds);
        let states: Vec<(TargetState, bool, bool)> =
            local.iter().map(|s| (s.state, s.in_roi, false)).chain(global.iter().map(|&s| (s, false, true))).collect();

        let queries_before = self.oracle.query_count();
        let mut candidates = match self.extract(frame, &states) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("frame {t}: skipped ({e})");
                return Ok(FrameResult {
                    frame: t,
                    estimate: self.prev,
                    occluded: true,
                    candidates: Vec::new(),
                    uncertain: Vec::new(),
                    uncertain_count: 0,
                    oracle_queries_this_frame: 0,
                    oracle_queries_total: queries_before,
                    fast_update: Vec::new(),
                    knn_store_size: self.knn.len(),
                    retrained_oracle: false,
                    prune: PruneReport::default(),
                    skipped: true,
                });
            }
        };

        let uncertain = label_candidates(&mut candidates, &self.knn, &self.oracle, &self.cfg, self.variant, t)?;

        let mut retrained = false;
        if self.variant.uses_oracle() {
            for c in &candidates {
                self.staging.push(c.feature.clone(), c.label.unwrap_or(Label::Negative), t);
            }
            if t % self.cfg.delta == 0 {
                let batch = self.staging.take();
                self.oracle.retrain(&batch);
                retrained = true;
            }
        }

        let (estimate, occluded) = localize(&candidates, self.cfg.tau_p, self.cfg.tau_a, &self.prev);

        let mut fast_update = Vec::new();
        if !occluded && self.variant.uses_fast_classifier() {
            for &i in &uncertain {
                let c = &candidates[i];
                // Only the co-tracker's oracle labels, or a baseline's own labels, ever reach the store.
                let allowed = match self.variant {
                    Variant::Ust => c.labeled_by == Some(LabelSource::Oracle),
                    _ => c.labeled_by == Some(LabelSource::Fast),
                };
                if let (true, Some(label)) = (allowed, c.label) {
                    self.knn.insert(&c.feature, label, t)?;
                    fast_update.push(i);
                }
            }
        }
        let prune = if self.variant.uses_fast_classifier() {
            self.knn.tick();
            self.knn.prune()
        } else {
            PruneReport::default()
        };

        self.prev = estimate;
        let total = self.oracle.query_count();
        Ok(FrameResult {
            frame: t,
            estimate,
            occluded,
            uncertain_count: uncertain.len(),
            uncertain,
            candidates,
            oracle_queries_this_frame: total - queries_before,
            oracle_queries_total: total,
            fast_update,
            knn_store_size: self.knn.len(),
            retrained_oracle: retrained,
            prune,
            skipped: false,
        })
    }
}
