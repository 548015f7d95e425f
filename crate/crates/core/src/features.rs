//! Patch features: joint color histograms and a PCA projection that maps raw
//! feature arrays to the fixed dimension the classifiers work in.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Rect;
use crate::linalg::symmetric_eigen;
use crate::sample::FeatureVector;
use crate::{Error, Result};

/// An RGB image with channels in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, found: pixels.len() });
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        RgbImage { width, height, pixels: vec![color; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, color: [f64; 3]) {
        self.pixels[y * self.width + x] = color;
    }

    /// Pixel-index range covered by `rect`, clipped to the image. Pixel
    /// `(x, y)` is covered when its center lies inside the rectangle; at
    /// least one pixel is kept for rectangles that overlap the image.
    pub fn pixel_span(&self, rect: &Rect) -> Option<(usize, usize, usize, usize)> {
        let clip = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
            let a = libm::round(lo).max(0.0);
            let b = libm::round(hi).min(n as f64);
            if b > a {
                Some((a as usize, b as usize))
            } else {
                // Sub-pixel extent: keep the pixel containing the midpoint.
                let mid = libm::floor((lo + hi) / 2.0);
                (mid >= 0.0 && mid < n as f64).then(|| (mid as usize, mid as usize + 1))
            }
        };
        let (x0, x1) = clip(rect.x0, rect.x1, self.width)?;
        let (y0, y1) = clip(rect.y0, rect.y1, self.height)?;
        Some((x0, x1, y0, y1))
    }

    /// Copies the pixels covered by `rect`. Returns an empty image when the
    /// rectangle misses the frame.
    pub fn crop(&self, rect: &Rect) -> RgbImage {
        let Some((x0, x1, y0, y1)) = self.pixel_span(rect) else {
            return RgbImage { width: 0, height: 0, pixels: Vec::new() };
        };
        let mut pixels = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            pixels.extend_from_slice(&self.pixels[y * self.width + x0..y * self.width + x1]);
        }
        RgbImage { width: x1 - x0, height: y1 - y0, pixels }
    }
}

/// Either image pixels or a feature array supplied directly (simulator).
#[derive(Debug, Clone, PartialEq)]
pub enum RawPatch {
    Pixels(RgbImage),
    Features(Vec<f64>),
}

impl RawPatch {
    /// Raw feature array: a color histogram for pixel patches, the array
    /// itself otherwise.
    pub fn raw_features(&self, bins_per_channel: usize) -> Result<Vec<f64>> {
        match self {
            RawPatch::Pixels(img) => color_histogram(img, bins_per_channel).map(FeatureVector::into_inner),
            RawPatch::Features(v) => {
                if v.is_empty() {
                    Err(Error::EmptyPatch)
                } else {
                    Ok(v.clone())
                }
            }
        }
    }
}

/// Joint RGB histogram with `bins^3` cells, L1-normalized.
pub fn color_histogram(patch: &RgbImage, bins_per_channel: usize) -> Result<FeatureVector> {
    if bins_per_channel < 2 {
        return Err(Error::invalid("bins_per_channel must be at least 2"));
    }
    if patch.pixels.is_empty() {
        return Err(Error::EmptyPatch);
    }
    let b = bins_per_channel;
    let bin = |v: f64| -> usize {
        let i = libm::floor(v.clamp(0.0, 1.0) * b as f64) as usize;
        i.min(b - 1)
    };
    let mut counts = vec![0usize; b * b * b];
    for p in &patch.pixels {
        counts[(bin(p[0]) * b + bin(p[1])) * b + bin(p[2])] += 1;
    }
    let total = patch.pixels.len() as f64;
    FeatureVector::new(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Frozen PCA projection from `input_dim` raw features to `output_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureProjector {
    mean: Vec<f64>,
    /// Row-major `input_dim x output_dim`, orthonormal columns.
    basis: Vec<f64>,
    explained_variance: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
}

impl FeatureProjector {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Entry `(i, j)` of the basis: component `i` of principal direction `j`.
    pub fn basis(&self, i: usize, j: usize) -> f64 {
        self.basis[i * self.output_dim + j]
    }

    /// Principal direction `j` as a raw-space vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        (0..self.input_dim).map(|i| self.basis(i, j)).collect()
    }

    /// Variance captured by each component, non-increasing.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `basis^T (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<FeatureVector> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, found: x.len() });
        }
        let d = self.output_dim;
        let mut out = vec![0.0; d];
        for (i, (&xi, &mi)) in x.iter().zip(&self.mean).enumerate() {
            let c = xi - mi;
            let row = &self.basis[i * d..(i + 1) * d];
            for (o, &b) in out.iter_mut().zip(row) {
                *o += b * c;
            }
        }
        FeatureVector::new(out)
    }
}

/// Fits a PCA projector on `data` keeping the top `target_dim` directions.
///
/// Needs at least `target_dim + 1` samples, all of the same dimension.
pub fn pca_fit<T: AsRef<[f64]>>(data: &[T], target_dim: usize) -> Result<FeatureProjector> {
    let first = data.first().ok_or(Error::InsufficientSamples { needed: target_dim + 1, found: 0 })?;
    let dim = first.as_ref().len();
    if target_dim == 0 || target_dim > dim {
        return Err(Error::invalid("target dimension must be in 1..=input dimension"));
    }
    if data.len() < target_dim + 1 {
        return Err(Error::InsufficientSamples { needed: target_dim + 1, found: data.len() });
    }
    for row in data {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }

    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for row in data {
        for ((c, v), m) in centered.iter_mut().zip(row.as_ref()).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            for j in i..dim {
                cov[i * dim + j] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / (n - 1.0);
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }

    let eig = symmetric_eigen(&cov, dim);
    let mut basis = vec![0.0; dim * target_dim];
    for i in 0..dim {
        basis[i * target_dim..(i + 1) * target_dim].copy_from_slice(&eig.vectors[i * dim..i * dim + target_dim]);
    }
    let explained_variance = eig.values[..target_dim].iter().map(|v| v.max(0.0)).collect();
    Ok(FeatureProjector { mean, basis, explained_variance, input_dim: dim, output_dim: target_dim })
}
