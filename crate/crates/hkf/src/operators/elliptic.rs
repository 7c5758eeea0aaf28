use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operators::grid::IntervalGrid;

/// Conductivity `a(x)` of the operator `-(a u')'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientField {
    Constant { value: f64 },
    /// `left` on `[0, breakpoint]`, `right` on `(breakpoint, 1]`.
    Piecewise { left: f64, right: f64, breakpoint: f64 },
}

impl CoefficientField {
    pub fn constant(value: f64) -> Result<Self> {
        let c = CoefficientField::Constant { value };
        c.validate()?;
        Ok(c)
    }

    /// The two-level field `1` on `[0, θ]`, `2` on `(θ, 1]`.
    pub fn step(theta: f64) -> Result<Self> {
        let c = CoefficientField::Piecewise { left: 1.0, right: 2.0, breakpoint: theta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CoefficientField::Constant { value } if value > 0.0 && value.is_finite() => Ok(()),
            CoefficientField::Constant { value } => invalid(format!("coefficient must be positive, got {value}")),
            CoefficientField::Piecewise { left, right, breakpoint } => {
                if !(left > 0.0 && right > 0.0 && left.is_finite() && right.is_finite()) {
                    return invalid("coefficient levels must be positive");
                }
                if !(breakpoint > 0.0 && breakpoint < 1.0) {
                    return invalid(format!("breakpoint {breakpoint} must lie in (0, 1)"));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        match *self {
            CoefficientField::Constant { value } => value,
            CoefficientField::Piecewise { left, right, breakpoint } => {
                if x <= breakpoint {
                    left
                } else {
                    right
                }
            }
        }
    }

    /// Values at the `n + 1` cell midpoints `x_{i+1/2}`, `i = 0..=n`.
    pub fn midpoints(&self, grid: IntervalGrid) -> Vec<f64> {
        let h = grid.h();
        (0..=grid.n_interior).map(|i| self.at((i as f64 + 0.5) * h)).collect()
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Tridiagonal {
        Tridiagonal {
            diag: self.diag.iter().map(|v| v * c).collect(),
            off: self.off.iter().map(|v| v * c).collect(),
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// LDLᵀ pivots; all positive iff the matrix is positive definite.
    pub fn pivots(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let p = if i == 0 { self.diag[0] } else { self.diag[i] - self.off[i - 1] * self.off[i - 1] / d[i - 1] };
            d.push(p);
        }
        d
    }

    /// `log det` of a positive definite tridiagonal matrix.
    pub fn log_det(&self) -> Result<f64> {
        let mut acc = 0.0;
        for (i, p) in self.pivots().into_iter().enumerate() {
            if !(p > 0.0) {
                return Err(crate::Error::NotPositiveDefinite { pivot: i });
            }
            acc += p.ln();
        }
        Ok(acc)
    }

    /// Solve `T x = b` (Thomas algorithm, no pivoting; for SPD input).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let piv = self.pivots();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.off[i - 1] / piv[i - 1] * y[i - 1];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = y[i];
            if i + 1 < n {
                v -= self.off[i] * x[i + 1];
            }
            x[i] = v / piv[i];
        }
        x
    }
}

/// Flux-form discretization of `-(a u')'` with homogeneous Dirichlet ends:
/// `(A u)_i = [a_{i-1/2}(u_i - u_{i-1}) - a_{i+1/2}(u_{i+1} - u_i)] / h²`.
pub fn assemble_elliptic(a: &CoefficientField, grid: IntervalGrid) -> Result<Tridiagonal> {
    a.validate()?;
    let mid = a.midpoints(grid);
    Ok(stencil(&mid).scaled(1.0 / (grid.h() * grid.h())))
}

/// Unscaled stencil `Dᵀ diag(mid) D` for midpoint values `mid` (length n+1).
pub(crate) fn stencil(mid: &[f64]) -> Tridiagonal {
    let n = mid.len() - 1;
    Tridiagonal {
        diag: (0..n).map(|i| mid[i] + mid[i + 1]).collect(),
        off: (0..n.saturating_sub(1)).map(|i| -mid[i + 1]).collect(),
    }
}
