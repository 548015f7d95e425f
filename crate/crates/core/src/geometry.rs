//! Axis-aligned boxes and overlap.

use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A center-based bounding box: the target state the tracker estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TargetState {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl TargetState {
    /// Builds a validated state.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let s = TargetState { cx, cy, w, h };
        s.validate()?;
        Ok(s)
    }

    /// Converts from the corner convention (`x`, `y` = top-left) used by
    /// ground-truth files.
    pub fn from_corner(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    /// Returns `(x, y, w, h)` with `x`, `y` the top-left corner.
    pub fn to_corner(&self) -> [f64; 4] {
        [self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.cx.is_finite() && self.cy.is_finite() && self.w.is_finite() && self.h.is_finite();
        if finite && self.w > 0.0 && self.h > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidBox)
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn rect(&self) -> Rect {
        Rect {
            x0: self.cx - self.w / 2.0,
            y0: self.cy - self.h / 2.0,
            x1: self.cx + self.w / 2.0,
            y1: self.cy + self.h / 2.0,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        TargetState { cx: self.cx + dx, cy: self.cy + dy, ..*self }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        TargetState { cx: a[0], cy: a[1], w: a[2], h: a[3] }
    }

    /// Moves the box so that its center lies inside `bounds`. Extent is
    /// shrunk to the bounds when it does not fit.
    pub fn clamped_center(&self, bounds: &Rect) -> Self {
        let cx = self.cx.clamp(bounds.x0, bounds.x1);
        let cy = self.cy.clamp(bounds.y0, bounds.y1);
        TargetState { cx, cy, w: self.w.min(bounds.width()), h: self.h.min(bounds.height()) }
    }
}

/// A corner-based rectangle `[x0, x1] x [y0, y1]`, used for frame bounds and
/// regions of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// Frame bounds of a `width` x `height` image with the origin at the
    /// top-left.
    pub fn frame(width: f64, height: f64) -> Self {
        Rect::new(0.0, 0.0, width, height)
    }

    pub fn width(&self) -> f64 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y1 - self.y0).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0)
    }

    /// Closed-interval point membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        }
    }

    /// Area of the intersection, zero when disjoint.
    pub fn overlap_area(&self, other: &Rect) -> f64 {
        let i = self.intersect(other);
        i.width() * i.height()
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &TargetState, b: &TargetState) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(iou_unchecked(a, b))
}

pub(crate) fn iou_unchecked(a: &TargetState, b: &TargetState) -> f64 {
    let inter = a.rect().overlap_area(&b.rect());
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}
