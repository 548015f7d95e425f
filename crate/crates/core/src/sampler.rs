//! Candidate generation: Gaussian samples around the previous state inside
//! a region of interest, plus uniformly drawn distant background samples.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{Rect, TargetState};
use crate::math::sqrt;
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct SamplerConfig {
    /// Local samples per frame.
    pub n: usize,
    /// Global background samples per frame.
    pub n_prime: usize,
    /// Standard deviation of the center, in pixels.
    pub sigma_cx: f64,
    pub sigma_cy: f64,
    /// Standard deviation of the extent in pixels; `None` uses
    /// `scale_sigma_fraction` of the previous extent.
    pub sigma_w: Option<f64>,
    pub sigma_h: Option<f64>,
    pub scale_sigma_fraction: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n: 300,
            n_prime: 30,
            sigma_cx: 6.0,
            sigma_cy: 6.0,
            sigma_w: None,
            sigma_h: None,
            scale_sigma_fraction: 0.05,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let opt = |v: Option<f64>| v.is_none_or(positive);
        if !(positive(self.sigma_cx) && positive(self.sigma_cy) && opt(self.sigma_w) && opt(self.sigma_h)) {
            return Err(Error::invalid("sampling sigmas must be positive"));
        }
        if !positive(self.scale_sigma_fraction) {
            return Err(Error::invalid("scale sigma fraction must be positive"));
        }
        Ok(())
    }

    /// Per-component deviations `(cx, cy, w, h)` around `prev`.
    pub fn sigmas(&self, prev: &TargetState) -> [f64; 4] {
        [
            self.sigma_cx,
            self.sigma_cy,
            self.sigma_w.unwrap_or(self.scale_sigma_fraction * prev.w),
            self.sigma_h.unwrap_or(self.scale_sigma_fraction * prev.h),
        ]
    }

    /// Radius around the previous center that global background samples
    /// must avoid.
    pub fn exclusion_radius(&self) -> f64 {
        3.0 * self.sigma_cx.max(self.sigma_cy)
    }
}

/// Union of rectangles; always contains the previous target area.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOfInterest {
    rects: Vec<Rect>,
}

impl RegionOfInterest {
    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rects.iter().any(|r| r.contains(x, y))
    }
}

/// The previous box dilated to twice its extent, united with any motion
/// regions, all clipped to the frame.
pub fn make_roi(prev: &TargetState, motion_hint: Option<&[Rect]>, frame_bounds: &Rect) -> RegionOfInterest {
    let dilated = TargetState { w: 2.0 * prev.w, h: 2.0 * prev.h, ..*prev }.rect();
    let mut rects = Vec::with_capacity(1 + motion_hint.map_or(0, <[Rect]>::len));
    let mut own = dilated.intersect(frame_bounds);
    if !own.contains(prev.cx, prev.cy) {
        // previous center on or past the frame edge
        own = Rect::new(own.x0.min(prev.cx), own.y0.min(prev.cy), own.x1.max(prev.cx), own.y1.max(prev.cy));
    }
    rects.push(own);
    for r in motion_hint.unwrap_or(&[]) {
        let c = r.intersect(frame_bounds);
        if !c.is_empty() {
            rects.push(c);
        }
    }
    RegionOfInterest { rects }
}

/// A local sample and whether its center fell inside the ROI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSample {
    pub state: TargetState,
    pub in_roi: bool,
}

/// Seeded sampler; one per tracker.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Sampler { cfg, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// `n` states from the diagonal Gaussian centered on `prev`.
    pub fn draw_candidates(&mut self, prev: &TargetState, roi: &RegionOfInterest) -> Vec<LocalSample> {
        let sig = self.cfg.sigmas(prev);
        let mean = prev.as_array();
        let dists: Vec<Normal<f64>> = (0..4).map(|i| Normal::new(mean[i], sig[i]).expect("sigma validated")).collect();
        let min_w = (0.1 * prev.w).min(1.0);
        let min_h = (0.1 * prev.h).min(1.0);
        (0..self.cfg.n)
            .map(|_| {
                let cx = dists[0].sample(&mut self.rng);
                let cy = dists[1].sample(&mut self.rng);
                let w = dists[2].sample(&mut self.rng).max(min_w);
                let h = dists[3].sample(&mut self.rng).max(min_h);
                let state = TargetState { cx, cy, w, h };
                LocalSample { state, in_roi: roi.contains(cx, cy) }
            })
            .collect()
    }

    /// `n'` states uniform over the frame whose centers lie farther than the
    /// exclusion radius from `prev`. May return fewer when the frame leaves
    /// little admissible area.
    pub fn draw_global_background(&mut self, prev: &TargetState, frame_bounds: &Rect) -> Vec<TargetState> {
        let want = self.cfg.n_prime;
        if want == 0 {
            return Vec::new();
        }
        let r = self.cfg.exclusion_radius();
        let far_x = (prev.cx - frame_bounds.x0).abs().max((frame_bounds.x1 - prev.cx).abs());
        let far_y = (prev.cy - frame_bounds.y0).abs().max((frame_bounds.y1 - prev.cy).abs());
        if frame_bounds.is_empty() || sqrt(far_x * far_x + far_y * far_y) <= r {
            log::warn!("frame too small for global background samples");
            return Vec::new();
        }
        let mut out = Vec::with_capacity(want);
        let mut attempts = 0;
        while out.len() < want && attempts < 100 * want {
            attempts += 1;
            let cx = self.rng.random_range(frame_bounds.x0..=frame_bounds.x1);
            let cy = self.rng.random_range(frame_bounds.y0..=frame_bounds.y1);
            let (dx, dy) = (cx - prev.cx, cy - prev.cy);
            if sqrt(dx * dx + dy * dy) > r {
                out.push(TargetState { cx, cy, ..*prev });
            }
        }
        if out.len() < want {
            log::warn!("global background: drew {} of {want} samples", out.len());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prev() -> TargetState {
        TargetState::new(100.0, 80.0, 20.0, 30.0).unwrap()
    }

    #[test]
    fn roi_without_hint_is_the_dilated_box() {
        let roi = make_roi(&prev(), None, &Rect::frame(640.0, 480.0));
        assert_eq!(roi.rects(), &[Rect::new(80.0, 50.0, 120.0, 110.0)]);
    }

    #[test]
    fn roi_unites_disjoint_hint() {
        let hint = [Rect::new(300.0, 300.0, 340.0, 330.0)];
        let roi = make_roi(&prev(), Some(&hint), &Rect::frame(640.0, 480.0));
        assert!(roi.contains(100.0, 80.0));
        assert!(roi.contains(320.0, 310.0));
        assert!(!roi.contains(200.0, 200.0));
    }

    #[test]
    fn roi_contains_center_at_frame_edge() {
        let p = TargetState::new(0.0, 480.0, 10.0, 10.0).unwrap();
        let roi = make_roi(&p, None, &Rect::frame(640.0, 480.0));
        assert!(roi.contains(0.0, 480.0));
    }

    #[test]
    fn vanishing_sigma_reproduces_prev() {
        let cfg = SamplerConfig {
            n: 50,
            sigma_cx: 1e-300,
            sigma_cy: 1e-300,
            sigma_w: Some(1e-300),
            sigma_h: Some(1e-300),
            ..SamplerConfig::default()
        };
        let mut s = Sampler::new(cfg, 1).unwrap();
        let roi = make_roi(&prev(), None, &Rect::frame(640.0, 480.0));
        for c in s.draw_candidates(&prev(), &roi) {
            assert_eq!(c.state, prev());
            assert!(c.in_roi);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let roi = make_roi(&prev(), None, &Rect::frame(640.0, 480.0));
        let mut a = Sampler::new(SamplerConfig::default(), 5).unwrap();
        let mut b = Sampler::new(SamplerConfig::default(), 5).unwrap();
        assert_eq!(a.draw_candidates(&prev(), &roi), b.draw_candidates(&prev(), &roi));
        let bounds = Rect::frame(640.0, 480.0);
        assert_eq!(a.draw_global_background(&prev(), &bounds), b.draw_global_background(&prev(), &bounds));
    }

    #[test]
    fn empirical_mean_matches_prev() {
        let cfg = SamplerConfig { n: 10_000, ..SamplerConfig::default() };
        let sig = cfg.sigmas(&prev());
        let mut s = Sampler::new(cfg, 77).unwrap();
        let roi = make_roi(&prev(), None, &Rect::frame(640.0, 480.0));
        let draws = s.draw_candidates(&prev(), &roi);
        let p = prev().as_array();
        for i in 0..4 {
            let mean = draws.iter().map(|c| c.state.as_array()[i]).sum::<f64>() / draws.len() as f64;
            assert!((mean - p[i]).abs() < 3.0 * sig[i] / 100.0, "component {i}: {mean}");
        }
    }

    #[test]
    fn global_background_respects_exclusion() {
        let cfg = SamplerConfig { n_prime: 1000, ..SamplerConfig::default() };
        let r = cfg.exclusion_radius();
        let mut s = Sampler::new(cfg, 3).unwrap();
        let bounds = Rect::frame(640.0, 480.0);
        let out = s.draw_global_background(&prev(), &bounds);
        assert_eq!(out.len(), 1000);
        for b in out {
            assert!(((b.cx - 100.0).powi(2) + (b.cy - 80.0).powi(2)).sqrt() > r);
            assert!(bounds.contains(b.cx, b.cy));
        }
    }

    #[test]
    fn tight_frame_terminates() {
        // exclusion radius 18; a 40x40 frame centered on prev leaves only corners
        let cfg = SamplerConfig { n_prime: 1000, ..SamplerConfig::default() };
        let p = TargetState::new(20.0, 20.0, 4.0, 4.0).unwrap();
        let mut s = Sampler::new(cfg, 4).unwrap();
        let out = s.draw_global_background(&p, &Rect::frame(40.0, 40.0));
        assert!(!out.is_empty());
        for b in &out {
            assert!(((b.cx - 20.0).powi(2) + (b.cy - 20.0).powi(2)).sqrt() > 18.0);
        }
        // every point of a 24x24 frame lies within 18 of its center
        let mut s = Sampler::new(SamplerConfig { n_prime: 5, ..SamplerConfig::default() }, 4).unwrap();
        let mid = TargetState::new(12.0, 12.0, 4.0, 4.0).unwrap();
        assert!(s.draw_global_background(&mid, &Rect::frame(24.0, 24.0)).is_empty());
    }

    #[test]
    fn disabled_global_background() {
        let mut s = Sampler::new(SamplerConfig { n_prime: 0, ..SamplerConfig::default() }, 1).unwrap();
        assert!(s.draw_global_background(&prev(), &Rect::frame(640.0, 480.0)).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig { n: 0, ..SamplerConfig::default() }.validate().is_err());
        assert!(SamplerConfig { sigma_cx: 0.0, ..SamplerConfig::default() }.validate().is_err());
        assert!(SamplerConfig { sigma_w: Some(-1.0), ..SamplerConfig::default() }.validate().is_err());
    }
}
