//! Deterministic synthetic scenarios with exact ground truth.
//!
//! A scenario is a virtual frame containing a moving target, optional
//! distractors and scripted occlusion episodes. Instead of rendering pixels
//! it answers feature queries directly: the feature of a box is a blend of
//! the signatures of the objects it overlaps (weighted by overlap), the local
//! background signature for the remainder, and seeded noise that depends
//! only on the scenario, the frame and the box.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::features::RgbImage;
use crate::geometry::{iou_unchecked, Rect, TargetState};
use crate::math::{hash_words, sqrt, unit_from_hash};
use crate::oracle::{GroundTruth, TruthFrame};
use crate::tracker::FrameSource;
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

const TAU: f64 = core::f64::consts::TAU;
/// Wavelength in pixels of the spatial background variation.
const BACKGROUND_WAVELENGTH: f64 = 240.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "kind", rename_all = "kebab-case"))]
pub enum Motion {
    /// Constant velocity, reflected at the frame edges.
    Linear { start: [f64; 2], velocity: [f64; 2] },
    /// Piecewise-linear through `[frame, cx, cy]` points.
    Waypoints { points: Vec<[f64; 3]> },
    /// `center + amplitude * sin(2 pi t / period + phase)` per axis.
    Lissajous { center: [f64; 2], amplitude: [f64; 2], period: [f64; 2], phase: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct TrajectorySpec {
    /// Width and height at scale 1.
    pub size: [f64; 2],
    pub motion: Motion,
    /// Relative amplitude of a sinusoidal scale change.
    #[cfg_attr(feature = "serde", serde(default))]
    pub scale_amplitude: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_scale_period"))]
    pub scale_period: f64,
}

#[cfg(feature = "serde")]
fn default_scale_period() -> f64 {
    200.0
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct DistractorSpec {
    pub trajectory: TrajectorySpec,
    /// 0 looks like background, 1 is identical to the target.
    pub similarity: f64,
}

/// A scripted occlusion: full on `start..=end`, ramping linearly in and out
/// over `ramp` frames on either side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct OcclusionSpec {
    pub start: usize,
    pub end: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub ramp: usize,
    /// Distance of the occluder signature from the background signature,
    /// relative to the target-background separation.
    #[cfg_attr(feature = "serde", serde(default = "default_occluder_offset"))]
    pub occluder_offset: f64,
    /// Mix of the target signature in the occluder signature, in `[0, 1]`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub occluder_similarity: f64,
}

#[cfg(feature = "serde")]
fn default_occluder_offset() -> f64 {
    0.5
}

/// Everything needed to build a scenario. This is what scenario files hold.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct ScenarioSpec {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tags: Vec<String>,
    pub frame_count: usize,
    pub width: f64,
    pub height: f64,
    pub feature_dim: usize,
    pub seed: u64,
    pub target: TrajectorySpec,
    /// Feature-space drift of the target signature per frame.
    #[cfg_attr(feature = "serde", serde(default))]
    pub drift: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise_std: f64,
    /// Amplitude of the spatial variation of the background signature.
    #[cfg_attr(feature = "serde", serde(default))]
    pub background_variation: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub distractors: Vec<DistractorSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub occlusions: Vec<OcclusionSpec>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::invalid("scenario needs at least one frame"));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::invalid("frame extent must be positive"));
        }
        if self.feature_dim < 2 {
            return Err(Error::invalid("feature dimension must be at least 2"));
        }
        let check_traj = |t: &TrajectorySpec| -> Result<()> {
            if !(t.size[0] > 0.0 && t.size[1] > 0.0 && t.size[0] <= self.width && t.size[1] <= self.height) {
                return Err(Error::invalid("object size must be positive and fit the frame"));
            }
            if !(0.0..1.0).contains(&t.scale_amplitude) || t.scale_period <= 0.0 {
                return Err(Error::invalid("scale amplitude must be in [0, 1) and period positive"));
            }
            if let Motion::Lissajous { period, .. } = &t.motion {
                if period[0] <= 0.0 || period[1] <= 0.0 {
                    return Err(Error::invalid("lissajous periods must be positive"));
                }
            }
            if let Motion::Waypoints { points } = &t.motion {
                if points.is_empty() {
                    return Err(Error::invalid("waypoint motion needs at least one point"));
                }
            }
            Ok(())
        };
        check_traj(&self.target)?;
        for d in &self.distractors {
            check_traj(&d.trajectory)?;
            if !(0.0..=1.0).contains(&d.similarity) {
                return Err(Error::invalid("distractor similarity must be in [0, 1]"));
            }
        }
        for o in &self.occlusions {
            if o.end < o.start {
                return Err(Error::invalid("occlusion end precedes start"));
            }
            if !(0.0..=1.0).contains(&o.occluder_similarity) {
                return Err(Error::invalid("occluder similarity must be in [0, 1]"));
            }
        }
        if self.noise_std < 0.0 || self.drift < 0.0 || self.background_variation < 0.0 {
            return Err(Error::invalid("noise, drift and background variation must be non-negative"));
        }
        Ok(())
    }
}

/// Reflects `x` into `[lo, hi]`.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let period = 2.0 * span;
    let mut r = (x - lo) % period;
    if r < 0.0 {
        r += period;
    }
    if r > span {
        lo + period - r
    } else {
        lo + r
    }
}

fn trajectory(spec: &TrajectorySpec, frames: usize, width: f64, height: f64) -> Vec<TargetState> {
    (0..frames)
        .map(|t| {
            let tf = t as f64;
            let scale = 1.0 + spec.scale_amplitude * libm::sin(TAU * tf / spec.scale_period);
            let (w, h) = (spec.size[0] * scale, spec.size[1] * scale);
            let (lo_x, hi_x) = (w / 2.0, width - w / 2.0);
            let (lo_y, hi_y) = (h / 2.0, height - h / 2.0);
            let (cx, cy) = match &spec.motion {
                Motion::Linear { start, velocity } => {
                    (reflect(start[0] + velocity[0] * tf, lo_x, hi_x), reflect(start[1] + velocity[1] * tf, lo_y, hi_y))
                }
                Motion::Waypoints { points } => {
                    let at = |p: &[f64; 3]| (p[1], p[2]);
                    let mut pos = at(&points[0]);
                    if tf >= points[points.len() - 1][0] {
                        pos = at(&points[points.len() - 1]);
                    } else {
                        for seg in points.windows(2) {
                            let (a, b) = (&seg[0], &seg[1]);
                            if tf >= a[0] && tf < b[0] {
                                let u = (tf - a[0]) / (b[0] - a[0]);
                                pos = (a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2]));
                                break;
                            }
                        }
                    }
                    (pos.0.clamp(lo_x, hi_x), pos.1.clamp(lo_y, hi_y))
                }
                Motion::Lissajous { center, amplitude, period, phase } => (
                    (center[0] + amplitude[0] * libm::sin(TAU * tf / period[0] + phase[0])).clamp(lo_x, hi_x),
                    (center[1] + amplitude[1] * libm::sin(TAU * tf / period[1] + phase[1])).clamp(lo_y, hi_y),
                ),
            };
            TargetState { cx, cy, w, h }
        })
        .collect()
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Unit vector orthogonal to every vector in `against` (Gram-Schmidt on a
/// random draw).
fn orthogonal_unit(rng: &mut ChaCha8Rng, dim: usize, against: &[&[f64]]) -> Vec<f64> {
    let mut v = gaussian_vector(rng, dim);
    for a in against {
        let aa: f64 = a.iter().map(|x| x * x).sum();
        if aa > 0.0 {
            let dot: f64 = v.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(a.iter()).for_each(|(x, y)| *x -= dot / aa * y);
        }
    }
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    out.iter_mut().zip(x).for_each(|(o, v)| *o += a * v);
}

#[derive(Debug, Clone)]
struct Occluder {
    spec: OcclusionSpec,
    signature: Vec<f64>,
}

impl Occluder {
    fn fraction(&self, t: usize) -> f64 {
        let (s, e, r) = (self.spec.start, self.spec.end, self.spec.ramp);
        if t >= s && t <= e {
            1.0
        } else if r > 0 && t < s && t + r >= s {
            1.0 - (s - t) as f64 / (r + 1) as f64
        } else if r > 0 && t > e && t <= e + r {
            1.0 - (t - e) as f64 / (r + 1) as f64
        } else {
            0.0
        }
    }
}

/// A built scenario. Immutable; every query is a pure function of its
/// arguments.
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    bounds: Rect,
    truth: Vec<TargetState>,
    distractor_paths: Vec<Vec<TargetState>>,
    target_base: Vec<f64>,
    drift_direction: Vec<f64>,
    background: Vec<f64>,
    background_axes: [Vec<f64>; 2],
    occluders: Vec<Occluder>,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.feature_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let target_base = gaussian_vector(&mut rng, dim);
        let background = gaussian_vector(&mut rng, dim);
        let separation: Vec<f64> = target_base.iter().zip(&background).map(|(t, b)| t - b).collect();
        let drift_direction = orthogonal_unit(&mut rng, dim, &[&separation]);
        let ax0 = orthogonal_unit(&mut rng, dim, &[&separation]);
        let ax1 = orthogonal_unit(&mut rng, dim, &[&separation, &ax0]);
        let sep_norm = norm(&separation);
        let occluders = spec
            .occlusions
            .iter()
            .map(|o| {
                let dir = orthogonal_unit(&mut rng, dim, &[&separation]);
                let mut signature = background.clone();
                axpy(&mut signature, o.occluder_offset * sep_norm, &dir);
                axpy(&mut signature, o.occluder_similarity, &separation);
                Occluder { spec: o.clone(), signature }
            })
            .collect();
        let (w, h, n) = (spec.width, spec.height, spec.frame_count);
        let truth = trajectory(&spec.target, n, w, h);
        let distractor_paths = spec.distractors.iter().map(|d| trajectory(&d.trajectory, n, w, h)).collect();
        Ok(Scenario {
            bounds: Rect::frame(w, h),
            truth,
            distractor_paths,
            target_base,
            drift_direction,
            background,
            background_axes: [ax0, ax1],
            occluders,
            spec,
        })
    }

    /// Same scenario with a different length.
    pub fn with_frame_count(&self, frames: usize) -> Self {
        let mut spec = self.spec.clone();
        spec.frame_count = frames;
        Scenario::new(spec).expect("spec was valid")
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn tags(&self) -> &[String] {
        &self.spec.tags
    }

    pub fn frame_count(&self) -> usize {
        self.spec.frame_count
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn feature_dim(&self) -> usize {
        self.spec.feature_dim
    }

    pub fn frame(&self, t: usize) -> FrameHandle<'_> {
        assert!(t < self.frame_count(), "frame {t} out of range");
        FrameHandle { scenario: self, t }
    }

    /// Ground-truth box and whether the target is fully occluded.
    pub fn ground_truth(&self, t: usize) -> (TargetState, bool) {
        (self.truth[t], self.occlusion_fraction(t) >= 1.0)
    }

    pub fn trajectory(&self) -> &[TargetState] {
        &self.truth
    }

    pub fn distractor_state(&self, i: usize, t: usize) -> TargetState {
        self.distractor_paths[i][t]
    }

    /// Covered fraction of the target, in `[0, 1]`.
    pub fn occlusion_fraction(&self, t: usize) -> f64 {
        self.occluders.iter().map(|o| o.fraction(t)).fold(0.0, f64::max)
    }

    /// Frames on which the target is fully occluded.
    pub fn occluded_frames(&self) -> Vec<usize> {
        (0..self.frame_count()).filter(|&t| self.ground_truth(t).1).collect()
    }

    pub fn target_signature(&self, t: usize) -> Vec<f64> {
        let mut s = self.target_base.clone();
        axpy(&mut s, self.spec.drift * t as f64, &self.drift_direction);
        s
    }

    /// Background signature at a frame position.
    pub fn background_signature(&self, cx: f64, cy: f64) -> Vec<f64> {
        let mut s = self.background.clone();
        let a = self.spec.background_variation;
        if a > 0.0 {
            axpy(&mut s, a * libm::sin(TAU * cx / BACKGROUND_WAVELENGTH), &self.background_axes[0]);
            axpy(&mut s, a * libm::sin(TAU * cy / BACKGROUND_WAVELENGTH), &self.background_axes[1]);
        }
        s
    }

    pub fn distractor_signature(&self, i: usize, t: usize) -> Vec<f64> {
        let sim = self.spec.distractors[i].similarity;
        let target = self.target_signature(t);
        target.iter().zip(&self.background).map(|(tv, bv)| sim * tv + (1.0 - sim) * bv).collect()
    }

    /// Objects visible at `t` as `(box, signature, visibility multiplier)`.
    fn objects(&self, t: usize) -> Vec<(TargetState, Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(2 + self.distractor_paths.len());
        let occ = self.occlusion_fraction(t);
        out.push((self.truth[t], self.target_signature(t), 1.0 - occ));
        if occ > 0.0 {
            // The most-covering episode supplies the occluder.
            let o = self
                .occluders
                .iter()
                .max_by(|a, b| a.fraction(t).total_cmp(&b.fraction(t)))
                .expect("occlusion implies an occluder");
            out.push((self.truth[t], o.signature.clone(), occ));
        }
        for (i, path) in self.distractor_paths.iter().enumerate() {
            out.push((path[t], self.distractor_signature(i, t), 1.0));
        }
        out
    }

    /// Blend weights of the visible objects for a query box; the background
    /// takes the remainder.
    pub fn blend_weights(&self, t: usize, query: &TargetState) -> (Vec<f64>, f64) {
        let mut w: Vec<f64> = self.objects(t).iter().map(|(b, _, vis)| iou_unchecked(query, b) * vis).collect();
        let total: f64 = w.iter().sum();
        if total > 1.0 {
            w.iter_mut().for_each(|x| *x /= total);
            (w, 0.0)
        } else {
            (w, 1.0 - total)
        }
    }

    /// Feature of `query` at frame `t`. The box is clipped to the frame.
    pub fn feature_at(&self, t: usize, query: &TargetState) -> Vec<f64> {
        let query = clip_box(query, &self.bounds);
        let objects = self.objects(t);
        let (weights, bg) = self.blend_weights(t, &query);
        let mut f = vec![0.0; self.feature_dim()];
        for ((_, sig, _), w) in objects.iter().zip(&weights) {
            if *w > 0.0 {
                axpy(&mut f, *w, sig);
            }
        }
        if bg > 0.0 {
            axpy(&mut f, bg, &self.background_signature(query.cx, query.cy));
        }
        if self.spec.noise_std > 0.0 {
            let h = hash_words(&[
                self.spec.seed,
                t as u64,
                query.cx.to_bits(),
                query.cy.to_bits(),
                query.w.to_bits(),
                query.h.to_bits(),
            ]);
            let mut rng = ChaCha8Rng::seed_from_u64(h);
            for v in f.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += self.spec.noise_std * z;
            }
        }
        f
    }

    /// Boxes of the objects that moved since the previous frame.
    pub fn motion_hint(&self, t: usize) -> Vec<Rect> {
        if t == 0 {
            return Vec::new();
        }
        let moved = |a: &TargetState, b: &TargetState| a != b;
        let mut out = Vec::new();
        if moved(&self.truth[t], &self.truth[t - 1]) {
            out.push(self.truth[t].rect());
        }
        for path in &self.distractor_paths {
            if moved(&path[t], &path[t - 1]) {
                out.push(path[t].rect());
            }
        }
        out
    }

    /// Renders frame `t` as an RGB image with integer pixel size.
    pub fn render(&self, t: usize) -> RgbImage {
        let (w, h) = (self.spec.width as usize, self.spec.height as usize);
        let mut img = RgbImage::filled(w, h, [0.0; 3]);
        let seed = self.spec.seed;
        let target = palette(seed, 1);
        let target_alt = palette(seed, 2);
        let back = palette(seed, 3);
        let back_alt = palette(seed, 4);
        let occluder = palette(seed, 5);
        for y in 0..h {
            for x in 0..w {
                let u = 0.5
                    + 0.5
                        * libm::sin(TAU * x as f64 / BACKGROUND_WAVELENGTH)
                        * libm::sin(TAU * y as f64 / BACKGROUND_WAVELENGTH);
                img.set_pixel(x, y, mix(back, back_alt, u));
            }
        }
        let paint = |img: &mut RgbImage, b: &TargetState, top: [f64; 3], bottom: [f64; 3], cover: f64| {
            if let Some((x0, x1, y0, y1)) = img.pixel_span(&b.rect()) {
                let mid = (y0 + y1) / 2;
                let x_end = x0 + libm::round((x1 - x0) as f64 * cover) as usize;
                for y in y0..y1 {
                    for x in x0..x_end.min(x1) {
                        img.set_pixel(x, y, if y < mid { top } else { bottom });
                    }
                }
            }
        };
        for (i, path) in self.distractor_paths.iter().enumerate() {
            let s = self.spec.distractors[i].similarity;
            paint(&mut img, &path[t], mix(back, target, s), mix(back_alt, target_alt, s), 1.0);
        }
        paint(&mut img, &self.truth[t], target, target_alt, 1.0);
        let occ = self.occlusion_fraction(t);
        if occ > 0.0 {
            paint(&mut img, &self.truth[t], occluder, occluder, occ);
        }
        if self.spec.noise_std > 0.0 {
            let amp = (self.spec.noise_std * 0.2).min(0.1);
            for y in 0..h {
                for x in 0..w {
                    let mut p = img.pixel(x, y);
                    for (c, v) in p.iter_mut().enumerate() {
                        let r = unit_from_hash(hash_words(&[seed, t as u64, x as u64, y as u64, c as u64]));
                        *v = (*v + amp * (2.0 * r - 1.0)).clamp(0.0, 1.0);
                    }
                    img.set_pixel(x, y, p);
                }
            }
        }
        img
    }
}

fn palette(seed: u64, i: u64) -> [f64; 3] {
    let c = |k: u64| 0.1 + 0.8 * unit_from_hash(hash_words(&[seed, 0xC0105, i, k]));
    [c(0), c(1), c(2)]
}

fn mix(a: [f64; 3], b: [f64; 3], u: f64) -> [f64; 3] {
    [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])]
}

fn clip_box(b: &TargetState, bounds: &Rect) -> TargetState {
    let r = b.rect().intersect(bounds);
    if r.is_empty() {
        // Entirely outside: keep a sliver on the nearest edge.
        let cx = b.cx.clamp(bounds.x0, bounds.x1);
        let cy = b.cy.clamp(bounds.y0, bounds.y1);
        return TargetState { cx, cy, w: b.w.min(bounds.width()).max(1e-6), h: b.h.min(bounds.height()).max(1e-6) };
    }
    TargetState { cx: (r.x0 + r.x1) / 2.0, cy: (r.y0 + r.y1) / 2.0, w: r.width().max(1e-6), h: r.height().max(1e-6) }
}

impl GroundTruth for Scenario {
    fn truth(&self, frame: usize) -> Option<TruthFrame> {
        (frame < self.frame_count())
            .then(|| TruthFrame { state: self.truth[frame], visibility: 1.0 - self.occlusion_fraction(frame) })
    }
}

/// One frame of a scenario.
#[derive(Debug, Clone, Copy)]
pub struct FrameHandle<'a> {
    scenario: &'a Scenario,
    t: usize,
}

impl FrameHandle<'_> {
    pub fn feature_at(&self, query: &TargetState) -> Vec<f64> {
        self.scenario.feature_at(self.t, query)
    }

    pub fn ground_truth(&self) -> (TargetState, bool) {
        self.scenario.ground_truth(self.t)
    }
}

impl FrameSource for FrameHandle<'_> {
    fn index(&self) -> usize {
        self.t
    }

    fn bounds(&self) -> Rect {
        self.scenario.bounds
    }

    fn raw_feature(&self, state: &TargetState) -> Result<Vec<f64>> {
        Ok(self.scenario.feature_at(self.t, state))
    }

    fn motion_hint(&self) -> Option<Vec<Rect>> {
        Some(self.scenario.motion_hint(self.t))
    }
}

/// Names of the built-in scenarios.
pub const BUILTIN_SCENARIOS: [&str; 5] = ["plain", "distractor-cross", "occlusion", "drift", "fast-motion"];

/// Frame at which the target and the distractor of `distractor-cross` meet.
pub const DISTRACTOR_CROSSING_FRAME: usize = 120;

fn base_spec(name: &str, tag: &str, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        tags: vec![tag.to_string()],
        frame_count: 300,
        width: 640.0,
        height: 480.0,
        feature_dim: 20,
        seed,
        target: TrajectorySpec {
            size: [50.0, 50.0],
            motion: Motion::Lissajous {
                center: [320.0, 240.0],
                amplitude: [200.0, 140.0],
                period: [600.0, 420.0],
                phase: [0.0, 0.0],
            },
            scale_amplitude: 0.1,
            scale_period: 250.0,
        },
        drift: 0.0,
        noise_std: 0.05,
        background_variation: 0.8,
        distractors: Vec::new(),
        occlusions: Vec::new(),
    }
}

/// Parameters of a built-in scenario.
pub fn builtin_spec(name: &str, seed: u64) -> Result<ScenarioSpec> {
    let spec = match name {
        "plain" => base_spec(name, "plain", seed),
        "distractor-cross" => {
            let mut s = base_spec(name, "distractor", seed);
            let tc = DISTRACTOR_CROSSING_FRAME as f64;
            let crossing = [320.0, 240.0];
            let (vt, vd) = (1.5, 1.1);
            s.target.motion = Motion::Linear { start: [crossing[0] - vt * tc, crossing[1]], velocity: [vt, 0.0] };
            s.target.scale_amplitude = 0.0;
            s.distractors.push(DistractorSpec {
                trajectory: TrajectorySpec {
                    size: [50.0, 50.0],
                    motion: Motion::Linear { start: [crossing[0], crossing[1] - vd * tc], velocity: [0.0, vd] },
                    scale_amplitude: 0.0,
                    scale_period: 200.0,
                },
                similarity: 0.9,
            });
            s
        }
        "occlusion" => {
            let mut s = base_spec(name, "occlusion", seed);
            // The estimate freezes while the target is hidden; a slow target
            // stays within search reach until it reappears.
            s.target.motion = Motion::Lissajous {
                center: [320.0, 240.0],
                amplitude: [80.0, 50.0],
                period: [1200.0, 900.0],
                phase: [0.0, 0.0],
            };
            for (start, end) in [(80, 90), (180, 195)] {
                s.occlusions.push(OcclusionSpec {
                    start,
                    end,
                    ramp: 8,
                    occluder_offset: 0.6,
                    occluder_similarity: 0.3,
                });
            }
            s
        }
        "drift" => {
            let mut s = base_spec(name, "deformation", seed);
            s.drift = 0.02;
            s
        }
        "fast-motion" => {
            let mut s = base_spec(name, "fast-motion", seed);
            s.target.motion = Motion::Lissajous {
                center: [320.0, 240.0],
                amplitude: [220.0, 160.0],
                period: [160.0, 120.0],
                phase: [0.0, 0.0],
            };
            s
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(spec)
}

pub fn builtin_scenario(name: &str, seed: u64) -> Result<Scenario> {
    Scenario::new(builtin_spec(name, seed)?)
}

/// The whole built-in catalog.
pub fn builtin_scenarios(seed: u64) -> Vec<Scenario> {
    BUILTIN_SCENARIOS.iter().map(|n| builtin_scenario(n, seed).expect("built-in scenarios are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        crate::math::sq_dist(a, b).sqrt()
    }

    fn noiseless(name: &str) -> Scenario {
        let mut spec = builtin_spec(name, 3).unwrap();
        spec.noise_std = 0.0;
        Scenario::new(spec).unwrap()
    }

    #[test]
    fn box_on_target_returns_target_signature() {
        let s = noiseless("plain");
        for t in [0, 17, 200] {
            let (gt, _) = s.ground_truth(t);
            let f = s.feature_at(t, &gt);
            assert!(dist(&f, &s.target_signature(t)) < 1e-12);
        }
    }

    #[test]
    fn far_box_returns_background() {
        let s = noiseless("plain");
        let (gt, _) = s.ground_truth(0);
        let far = TargetState { cx: 40.0, cy: 40.0, ..gt };
        assert!(iou_unchecked(&far, &gt) == 0.0);
        let f = s.feature_at(0, &far);
        assert!(dist(&f, &s.background_signature(40.0, 40.0)) < 1e-12);

        let noisy = builtin_scenario("plain", 3).unwrap();
        let f = noisy.feature_at(0, &far);
        let d = dist(&f, &noisy.background_signature(40.0, 40.0));
        // noise norm concentrates near std * sqrt(dim)
        assert!(d < 0.05 * 20f64.sqrt() * 2.0);
    }

    #[test]
    fn distractor_sits_between_target_and_background() {
        let mut spec = builtin_spec("distractor-cross", 3).unwrap();
        spec.noise_std = 0.0;
        spec.distractors[0].similarity = 0.8;
        let s = Scenario::new(spec).unwrap();
        let t = 10;
        let d = s.distractor_state(0, t);
        assert_eq!(iou_unchecked(&d, &s.ground_truth(t).0), 0.0);
        let f = s.feature_at(t, &d);
        let target = s.target_signature(t);
        let sep = dist(&target, &s.background);
        assert!((dist(&f, &target) - 0.2 * sep).abs() < 1e-9);
    }

    #[test]
    fn feature_is_referentially_transparent() {
        let a = builtin_scenario("drift", 9).unwrap();
        let b = builtin_scenario("drift", 9).unwrap();
        let q = TargetState::new(300.0, 200.0, 40.0, 44.0).unwrap();
        assert_eq!(a.feature_at(5, &q), a.feature_at(5, &q));
        assert_eq!(a.feature_at(5, &q), b.feature_at(5, &q));
        assert_ne!(a.feature_at(5, &q), a.feature_at(6, &q));
    }

    #[test]
    fn blend_weights_sum_to_one() {
        let s = builtin_scenario("distractor-cross", 1).unwrap();
        for t in [100, 118, 120, 125] {
            for dx in [-30.0, -10.0, 0.0, 15.0] {
                let (gt, _) = s.ground_truth(t);
                let (w, bg) = s.blend_weights(t, &gt.translated(dx, dx / 2.0));
                assert!((w.iter().sum::<f64>() + bg - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_distractor_is_indistinguishable() {
        let mut spec = builtin_spec("distractor-cross", 3).unwrap();
        spec.noise_std = 0.0;
        spec.distractors[0].similarity = 1.0;
        let s = Scenario::new(spec).unwrap();
        let t = 20;
        let a = s.feature_at(t, &s.ground_truth(t).0);
        let b = s.feature_at(t, &s.distractor_state(0, t));
        assert!(dist(&a, &b) < 1e-12);
    }

    #[test]
    fn occlusion_flags_exact_intervals() {
        let s = builtin_scenario("occlusion", 0).unwrap();
        let expect: Vec<usize> = (80..=90).chain(180..=195).collect();
        assert_eq!(s.occluded_frames(), expect);
        assert!(s.occlusion_fraction(79) > 0.0 && s.occlusion_fraction(79) < 1.0);
        assert_eq!(s.occlusion_fraction(60), 0.0);
        let (gt, _) = s.ground_truth(85);
        let f = s.feature_at(85, &gt);
        let noiseless_occ = {
            let mut spec = s.spec().clone();
            spec.noise_std = 0.0;
            Scenario::new(spec).unwrap()
        };
        let g = noiseless_occ.feature_at(85, &gt);
        assert!(dist(&g, &noiseless_occ.occluders[0].signature) < 1e-12);
        assert!(dist(&f, &g) < 1.0);
    }

    #[test]
    fn plain_has_no_challenges() {
        let s = builtin_scenario("plain", 0).unwrap();
        assert!(s.spec().distractors.is_empty());
        assert!(s.occluded_frames().is_empty());
    }

    #[test]
    fn linear_trajectory_is_evenly_spaced() {
        let s = builtin_scenario("distractor-cross", 0).unwrap();
        let tr = s.trajectory();
        for t in 1..200 {
            assert!(((tr[t].cx - tr[t - 1].cx) - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn crossing_is_closest_approach() {
        let s = builtin_scenario("distractor-cross", 0).unwrap();
        let d = |t: usize| {
            let (a, b) = (s.ground_truth(t).0, s.distractor_state(0, t));
            ((a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2)).sqrt()
        };
        let best = (0..s.frame_count()).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap();
        assert_eq!(best, DISTRACTOR_CROSSING_FRAME);
        assert!(d(best) < 1e-9);
    }

    #[test]
    fn trajectories_stay_in_frame() {
        for s in builtin_scenarios(5) {
            for b in s.trajectory() {
                let r = b.rect();
                assert!(r.x0 >= -1e-9 && r.y0 >= -1e-9 && r.x1 <= 640.0 + 1e-9 && r.y1 <= 480.0 + 1e-9, "{}", s.name());
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert_eq!(builtin_scenario("nope", 0).unwrap_err(), Error::UnknownScenario("nope".into()));
    }

    #[test]
    fn reflect_folds_into_range() {
        assert_eq!(reflect(5.0, 0.0, 10.0), 5.0);
        assert_eq!(reflect(12.0, 0.0, 10.0), 8.0);
        assert_eq!(reflect(-3.0, 0.0, 10.0), 3.0);
        assert_eq!(reflect(23.0, 0.0, 10.0), 3.0);
    }

    #[test]
    fn render_paints_target() {
        let s = noiseless("plain");
        let img = s.render(0);
        let (gt, _) = s.ground_truth(0);
        assert_eq!(img.pixel(gt.cx as usize, (gt.cy - gt.h / 4.0) as usize), palette(3, 1));
    }
}
