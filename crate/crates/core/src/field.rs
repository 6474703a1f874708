//! Per-pixel value containers: scalar fields, multi-channel signal fields,
//! and binary masks.

use crate::error::{Result, SunnError};
use crate::grid::GridDims;

/// Row-major scalar field over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dims: GridDims,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(SunnError::ShapeMismatch(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                dims.width,
                dims.height
            )));
        }
        Ok(ScalarField { dims, values })
    }

    pub fn filled(dims: GridDims, value: f64) -> Self {
        ScalarField {
            dims,
            values: vec![value; dims.len()],
        }
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[self.dims.index_of(x, y)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Min-max normalization to [0, 1]. A constant field maps to all zeros.
    pub fn normalized(&self) -> ScalarField {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let values = if span > 0.0 {
            self.values.iter().map(|v| (v - lo) / span).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        ScalarField {
            dims: self.dims,
            values,
        }
    }
}

/// Normalized per-pixel signals held by the paired input/processing neurons.
/// `channels` is 1 for grayscale, 3 for color; values are channel-interleaved
/// and must be finite within [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SignalField {
    dims: GridDims,
    channels: usize,
    values: Vec<f64>,
}

impl SignalField {
    pub fn new(dims: GridDims, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(SunnError::InvalidInput("channel count must be >= 1".into()));
        }
        if values.len() != dims.len() * channels {
            return Err(SunnError::ShapeMismatch(format!(
                "signal has {} values for a {}x{} grid with {} channels",
                values.len(),
                dims.width,
                dims.height,
                channels
            )));
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SunnError::InvalidInput(format!(
                    "signal value {v} outside [0, 1]"
                )));
            }
        }
        Ok(SignalField {
            dims,
            channels,
            values,
        })
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn pixel(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    /// Squared Euclidean distance over channels between two pixels.
    #[inline]
    pub fn distance_sq(&self, a: usize, b: usize) -> f64 {
        let pa = self.pixel(a);
        let pb = self.pixel(b);
        let mut acc = 0.0;
        for c in 0..self.channels {
            let d = pa[c] - pb[c];
            acc += d * d;
        }
        acc
    }

    /// First channel as a scalar field (for single-channel pipelines).
    pub fn channel(&self, c: usize) -> Result<ScalarField> {
        if c >= self.channels {
            return Err(SunnError::InvalidInput(format!(
                "channel {c} out of range for {} channels",
                self.channels
            )));
        }
        let values = (0..self.dims.len())
            .map(|k| self.values[k * self.channels + c])
            .collect();
        ScalarField::new(self.dims, values)
    }
}

/// Per-pixel boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: GridDims,
    values: Vec<bool>,
}

impl Mask {
    pub fn new(dims: GridDims, values: Vec<bool>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(SunnError::ShapeMismatch(format!(
                "mask has {} values for a {}x{} grid",
                values.len(),
                dims.width,
                dims.height
            )));
        }
        Ok(Mask { dims, values })
    }

    pub fn filled(dims: GridDims, value: bool) -> Self {
        Mask {
            dims,
            values: vec![value; dims.len()],
        }
    }

    /// Mask of pixels where `field >= threshold`.
    pub fn from_threshold(field: &ScalarField, threshold: f64) -> Mask {
        Mask {
            dims: field.dims(),
            values: field.values().iter().map(|&v| v >= threshold).collect(),
        }
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.values[self.dims.index_of(x, y)]
    }

    pub fn count_true(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims == other.dims
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| !a || b)
    }

    pub fn complement(&self) -> Mask {
        Mask {
            dims: self.dims,
            values: self.values.iter().map(|&b| !b).collect(),
        }
    }
}
