use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform interior grid `x_i = i·h`, `i = 1..=n`, `h = 1/(n+1)` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalGrid {
    pub n_interior: usize,
}

impl IntervalGrid {
    pub fn new(n_interior: usize) -> Self {
        assert!(n_interior >= 1, "grid needs at least one interior point");
        Self { n_interior }
    }

    pub fn len(&self) -> usize {
        self.n_interior
    }

    pub fn is_empty(&self) -> bool {
        self.n_interior == 0
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_interior + 1) as f64
    }

    /// Coordinate of the zero-based index `k` (grid point `k + 1`).
    pub fn point(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_interior).map(|k| self.point(k)).collect()
    }

    /// Zero-based index of the grid point at `x`, if `x` lies on the grid.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let pos = x * (self.n_interior + 1) as f64;
        let i = pos.round();
        if (pos - i).abs() > 1e-9 || i < 1.0 || i > self.n_interior as f64 {
            return Err(Error::OffGridSource { location: x });
        }
        Ok(i as usize - 1)
    }

    /// Zero-based indices of the points whose one-based index is a multiple
    /// of `stride`.
    pub fn stride_indices(&self, stride: usize) -> Vec<usize> {
        (1..=self.n_interior).filter(|i| i % stride == 0).map(|i| i - 1).collect()
    }
}
