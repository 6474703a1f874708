//! Grid dimensions and row-major neuron indexing.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SunnError};

/// Width and height of the neuron grid. One neuron pair per pixel; neuron
/// index `k` maps to `(x, y) = (k % width, k / width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub width: u32,
    pub height: u32,
}

impl GridDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(SunnError::InvalidDimensions { width, height });
        }
        Ok(GridDims { width, height })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index_of(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn coords_of(&self, k: usize) -> (u32, u32) {
        let w = self.width as usize;
        ((k % w) as u32, (k / w) as u32)
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(SunnError::IndexOutOfRange {
                index: k,
                count: self.len(),
            })
        }
    }

    /// Chebyshev distance between two neuron positions.
    pub fn chebyshev(&self, a: usize, b: usize) -> u32 {
        let (ax, ay) = self.coords_of(a);
        let (bx, by) = self.coords_of(b);
        let dx = (ax as i64 - bx as i64).unsigned_abs() as u32;
        let dy = (ay as i64 - by as i64).unsigned_abs() as u32;
        dx.max(dy)
    }
}
